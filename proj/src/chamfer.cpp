#include "skelpaint/chamfer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "skelpaint/parallel.hpp"

namespace skelpaint {

namespace {

inline double dist2(const double* a, const double* b) {
    double s = 0.0;
    for (int c = 0; c < 6; ++c) {
        double d = a[c] - b[c];
        s += d * d;
    }
    return s;
}

}  // namespace

NNIndex::NNIndex(const PointSet6D& points, int leaf_size) {
    if (points.empty()) throw EmptySet("NNIndex over empty point set");
    pts_ = points.data;
    order_.resize(static_cast<size_t>(points.size()));
    for (int64_t i = 0; i < points.size(); ++i) order_[static_cast<size_t>(i)] = i;
    nodes_.reserve(static_cast<size_t>(2 * points.size() / std::max(1, leaf_size) + 4));
    root_ = build(0, static_cast<int32_t>(order_.size()), std::max(1, leaf_size));
}

int32_t NNIndex::build(int32_t begin, int32_t end, int leaf_size) {
    int32_t id = static_cast<int32_t>(nodes_.size());
    nodes_.push_back(Node{});
    if (end - begin <= leaf_size) {
        // Leaves keep ascending point order so tie scans hit low indices first.
        std::sort(order_.begin() + begin, order_.begin() + end);
        nodes_[static_cast<size_t>(id)].begin = begin;
        nodes_[static_cast<size_t>(id)].end = end;
        return id;
    }

    // Split on the axis with the widest spread.
    double lo[6], hi[6];
    std::fill(lo, lo + 6, std::numeric_limits<double>::infinity());
    std::fill(hi, hi + 6, -std::numeric_limits<double>::infinity());
    for (int32_t i = begin; i < end; ++i) {
        const double* p = pts_.data() + order_[static_cast<size_t>(i)] * 6;
        for (int c = 0; c < 6; ++c) {
            lo[c] = std::min(lo[c], p[c]);
            hi[c] = std::max(hi[c], p[c]);
        }
    }
    int axis = 0;
    for (int c = 1; c < 6; ++c)
        if (hi[c] - lo[c] > hi[axis] - lo[axis]) axis = c;
    if (hi[axis] - lo[axis] == 0.0) {
        // All points identical: keep as a leaf regardless of size.
        std::sort(order_.begin() + begin, order_.begin() + end);
        nodes_[static_cast<size_t>(id)].begin = begin;
        nodes_[static_cast<size_t>(id)].end = end;
        return id;
    }

    int32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int64_t a, int64_t b) {
                         double va = pts_[static_cast<size_t>(a * 6 + axis)];
                         double vb = pts_[static_cast<size_t>(b * 6 + axis)];
                         return va < vb || (va == vb && a < b);
                     });
    double split = pts_[static_cast<size_t>(order_[static_cast<size_t>(mid)] * 6 + axis)];

    int32_t left = build(begin, mid, leaf_size);
    int32_t right = build(mid, end, leaf_size);
    Node& n = nodes_[static_cast<size_t>(id)];
    n.axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
}

void NNIndex::search(int32_t node_id, const double* p, double& best_d2, int64_t& best_idx) const {
    const Node& n = nodes_[static_cast<size_t>(node_id)];
    if (n.axis < 0) {
        for (int32_t i = n.begin; i < n.end; ++i) {
            int64_t idx = order_[static_cast<size_t>(i)];
            double d2 = dist2(p, pts_.data() + idx * 6);
            if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
                best_d2 = d2;
                best_idx = idx;
            }
        }
        return;
    }
    double delta = p[n.axis] - n.split;
    int32_t near = delta < 0.0 ? n.left : n.right;
    int32_t far = delta < 0.0 ? n.right : n.left;
    search(near, p, best_d2, best_idx);
    // Visit the far side on exact equality too, so index tie-breaks stay
    // identical to exhaustive search.
    if (delta * delta <= best_d2) search(far, p, best_d2, best_idx);
}

std::pair<int64_t, double> NNIndex::query(const double* p) const {
    double best_d2 = std::numeric_limits<double>::infinity();
    int64_t best_idx = size();  // sentinel above any real index
    search(root_, p, best_d2, best_idx);
    return {best_idx, std::sqrt(best_d2)};
}

namespace {

DirectedResult directed_from_queries(const PointSet6D& P,
                                     const std::function<std::pair<int64_t, double>(const double*)>& nearest) {
    int64_t n = P.size();
    DirectedResult r;
    r.matches.resize(static_cast<size_t>(n));
    r.distances.resize(static_cast<size_t>(n));
    parallel_for(static_cast<size_t>(n), [&](size_t i) {
        auto [idx, d] = nearest(P.row(static_cast<int64_t>(i)));
        r.matches[i] = idx;
        r.distances[i] = d;
    });
    r.value = pairwise_sum(r.distances.data(), static_cast<size_t>(n)) / static_cast<double>(n);
    return r;
}

std::pair<int64_t, double> brute_nearest(const double* p, const PointSet6D& Q) {
    double best_d2 = std::numeric_limits<double>::infinity();
    int64_t best = 0;
    for (int64_t q = 0; q < Q.size(); ++q) {
        double d2 = dist2(p, Q.row(q));
        if (d2 < best_d2) {
            best_d2 = d2;
            best = q;
        }
    }
    return {best, std::sqrt(best_d2)};
}

}  // namespace

DirectedResult directed_avg_min_brute(const PointSet6D& P, const PointSet6D& Q) {
    if (P.empty() || Q.empty()) throw EmptySet("directed_avg_min over empty point set");
    return directed_from_queries(P, [&](const double* p) { return brute_nearest(p, Q); });
}

DirectedResult directed_avg_min(const PointSet6D& P, const NNIndex& q_index) {
    if (P.empty()) throw EmptySet("directed_avg_min over empty point set");
    return directed_from_queries(P, [&](const double* p) { return q_index.query(p); });
}

DirectedResult directed_avg_min(const PointSet6D& P, const PointSet6D& Q) {
    if (P.empty() || Q.empty()) throw EmptySet("directed_avg_min over empty point set");
    NNIndex index(Q);
    return directed_avg_min(P, index);
}

namespace {

ChamferResult combine(DirectedResult a, DirectedResult b, ChamferReduce reduce) {
    ChamferResult r;
    r.A = a.value;
    r.B = b.value;
    r.value = reduce == ChamferReduce::Max ? std::max(r.A, r.B) : r.A + r.B;
    r.match_pq = std::move(a.matches);
    r.match_qp = std::move(b.matches);
    return r;
}

}  // namespace

ChamferResult chamfer_max(const PointSet6D& P, const PointSet6D& Q, ChamferReduce reduce) {
    if (P.empty() || Q.empty()) throw EmptySet("chamfer_max over empty point set");
    NNIndex p_index(P);
    NNIndex q_index(Q);
    return combine(directed_avg_min(P, q_index), directed_avg_min(Q, p_index), reduce);
}

ChamferResult chamfer_max_brute(const PointSet6D& P, const PointSet6D& Q, ChamferReduce reduce) {
    if (P.empty() || Q.empty()) throw EmptySet("chamfer_max over empty point set");
    return combine(directed_avg_min_brute(P, Q), directed_avg_min_brute(Q, P), reduce);
}

PointSet6D chamfer_grad(const PointSet6D& P, const PointSet6D& Q, const ChamferResult& res,
                        ChamferReduce reduce, ChamferGrad mode) {
    if (P.empty() || Q.empty()) throw EmptySet("chamfer_grad over empty point set");
    int64_t np = P.size();
    int64_t nq = Q.size();
    PointSet6D grad = PointSet6D::zeros(nq);

    // dA/dq: unit vectors from each P point toward its matched Q point,
    // accumulated on that Q point with weight 1/|P|.
    auto add_A = [&](double w) {
        for (int64_t i = 0; i < np; ++i) {
            int64_t q = res.match_pq[static_cast<size_t>(i)];
            const double* pv = P.row(i);
            const double* qv = Q.row(q);
            double d = 0.0;
            for (int c = 0; c < 6; ++c) {
                double diff = qv[c] - pv[c];
                d += diff * diff;
            }
            d = std::sqrt(d);
            if (d == 0.0) continue;
            double* g = grad.row(q);
            for (int c = 0; c < 6; ++c) g[c] += w * (qv[c] - pv[c]) / (d * static_cast<double>(np));
        }
    };
    // dB/dq: unit vector from each Q point's nearest P point, weight 1/|Q|.
    auto add_B = [&](double w) {
        for (int64_t q = 0; q < nq; ++q) {
            int64_t i = res.match_qp[static_cast<size_t>(q)];
            const double* pv = P.row(i);
            const double* qv = Q.row(q);
            double d = 0.0;
            for (int c = 0; c < 6; ++c) {
                double diff = qv[c] - pv[c];
                d += diff * diff;
            }
            d = std::sqrt(d);
            if (d == 0.0) continue;
            double* g = grad.row(q);
            for (int c = 0; c < 6; ++c) g[c] += w * (qv[c] - pv[c]) / (d * static_cast<double>(nq));
        }
    };

    if (reduce == ChamferReduce::Sum) {
        add_A(1.0);
        add_B(1.0);
    } else if (mode == ChamferGrad::Smooth) {
        add_A(0.5);
        add_B(0.5);
    } else if (res.A >= res.B) {
        add_A(1.0);
    } else {
        add_B(1.0);
    }
    return grad;
}

}  // namespace skelpaint
