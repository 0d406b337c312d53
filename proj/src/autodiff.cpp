#include "skelpaint/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "skelpaint/errors.hpp"

namespace skelpaint::ad {

namespace {

void require_finite(const Tensor& t, const char* op) {
    if (!t.all_finite()) throw NaNDetected(std::string("non-finite value produced by ") + op);
}

void require_matrix(const Tensor& t, const char* op) {
    if (t.shape.size() != 2) throw ShapeMismatch(std::string(op) + ": expected a rank-2 tensor, got " + shape_str(t.shape));
}

}  // namespace

const Tensor& Var::value() const { return tape->value(*this); }
const Tensor& Var::grad() const { return tape->grad(*this); }

Var Tape::push(Tensor value, bool needs_grad, std::function<void(Tape&, const Tensor&)> backprop) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(const Tensor& value) {
    require_finite(value, "leaf");
    return push(value, true, nullptr);
}

Var Tape::constant(const Tensor& value) {
    require_finite(value, "constant");
    return push(value, false, nullptr);
}

void Tape::accumulate(Var v, const Tensor& g) {
    Node& n = nodes_[static_cast<size_t>(v.id)];
    if (!n.needs_grad) return;
    if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.shape);
    if (!n.grad.same_shape(g)) throw ShapeMismatch("gradient shape mismatch");
    for (size_t i = 0; i < g.data.size(); ++i) n.grad.data[i] += g.data[i];
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw ShapeMismatch("backward: loss belongs to another tape");
    const Node& ln = nodes_[static_cast<size_t>(loss.id)];
    if (ln.value.numel() != 1) throw NonScalarLoss("backward requires a scalar loss, got shape " + shape_str(ln.value.shape));

    for (Node& n : nodes_) {
        if (n.needs_grad)
            n.grad = Tensor::zeros(n.value.shape);
        else
            n.grad = Tensor();
    }
    nodes_[static_cast<size_t>(loss.id)].grad.data[0] = 1.0;

    for (int32_t i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (!n.needs_grad || !n.backprop) continue;
        n.backprop(*this, n.grad);
    }
    for (const Node& n : nodes_)
        if (n.needs_grad && !n.grad.all_finite()) throw NaNDetected("non-finite gradient after backward");
}

Var matmul(Var a, Var b) {
    Tape& tape = *a.tape;
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_matrix(av, "matmul");
    require_matrix(bv, "matmul");
    int64_t m = av.shape[0], k = av.shape[1], k2 = bv.shape[0], n = bv.shape[1];
    if (k != k2) throw ShapeMismatch("matmul: " + shape_str(av.shape) + " x " + shape_str(bv.shape));

    Tensor out = Tensor::zeros({m, n});
    // i-k-j order keeps the inner loop contiguous in both b and out.
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = av.data.data() + i * k;
        double* orow = out.data.data() + i * n;
        for (int64_t kk = 0; kk < k; ++kk) {
            double aik = arow[kk];
            if (aik == 0.0) continue;
            const double* brow = bv.data.data() + kk * n;
            for (int64_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }
    require_finite(out, "matmul");

    bool needs = tape.nodes_[static_cast<size_t>(a.id)].needs_grad || tape.nodes_[static_cast<size_t>(b.id)].needs_grad;
    return tape.push(std::move(out), needs, [a, b, m, k, n](Tape& tp, const Tensor& g) {
        const Tensor& av2 = tp.value(a);
        const Tensor& bv2 = tp.value(b);
        if (tp.nodes_[static_cast<size_t>(a.id)].needs_grad) {
            Tensor ga = Tensor::zeros({m, k});  // g (m,n) x b^T (n,k)
            for (int64_t i = 0; i < m; ++i) {
                const double* grow = g.data.data() + i * n;
                double* garow = ga.data.data() + i * k;
                for (int64_t j = 0; j < n; ++j) {
                    double gij = grow[j];
                    if (gij == 0.0) continue;
                    for (int64_t kk = 0; kk < k; ++kk) garow[kk] += gij * bv2.data[static_cast<size_t>(kk * n + j)];
                }
            }
            tp.accumulate(a, ga);
        }
        if (tp.nodes_[static_cast<size_t>(b.id)].needs_grad) {
            Tensor gb = Tensor::zeros({k, n});  // a^T (k,m) x g (m,n)
            for (int64_t i = 0; i < m; ++i) {
                const double* arow = av2.data.data() + i * k;
                const double* grow = g.data.data() + i * n;
                for (int64_t kk = 0; kk < k; ++kk) {
                    double aik = arow[kk];
                    if (aik == 0.0) continue;
                    double* gbrow = gb.data.data() + kk * n;
                    for (int64_t j = 0; j < n; ++j) gbrow[j] += aik * grow[j];
                }
            }
            tp.accumulate(b, gb);
        }
    });
}

Var add(Var a, Var b) {
    Tape& tape = *a.tape;
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_shape(bv)) throw ShapeMismatch("add: " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
    Tensor out = av;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
    require_finite(out, "add");
    bool needs = tape.nodes_[static_cast<size_t>(a.id)].needs_grad || tape.nodes_[static_cast<size_t>(b.id)].needs_grad;
    return tape.push(std::move(out), needs, [a, b](Tape& tp, const Tensor& g) {
        tp.accumulate(a, g);
        tp.accumulate(b, g);
    });
}

Var add_rowwise(Var a, Var bias) {
    Tape& tape = *a.tape;
    const Tensor& av = a.value();
    const Tensor& bv = bias.value();
    require_matrix(av, "add_rowwise");
    int64_t m = av.shape[0], n = av.shape[1];
    if (bv.numel() != n) throw ShapeMismatch("add_rowwise: bias " + shape_str(bv.shape) + " vs cols " + std::to_string(n));
    Tensor out = av;
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out.data[static_cast<size_t>(i * n + j)] += bv.data[static_cast<size_t>(j)];
    require_finite(out, "add_rowwise");
    bool needs = tape.nodes_[static_cast<size_t>(a.id)].needs_grad || tape.nodes_[static_cast<size_t>(bias.id)].needs_grad;
    return tape.push(std::move(out), needs, [a, bias, m, n](Tape& tp, const Tensor& g) {
        tp.accumulate(a, g);
        if (tp.nodes_[static_cast<size_t>(bias.id)].needs_grad) {
            Tensor gb = Tensor::zeros(tp.value(bias).shape);
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < n; ++j) gb.data[static_cast<size_t>(j)] += g.data[static_cast<size_t>(i * n + j)];
            tp.accumulate(bias, gb);
        }
    });
}

Var scale(Var a, double s) {
    Tape& tape = *a.tape;
    Tensor out = a.value();
    for (double& v : out.data) v *= s;
    require_finite(out, "scale");
    return tape.push(std::move(out), tape.nodes_[static_cast<size_t>(a.id)].needs_grad, [a, s](Tape& tp, const Tensor& g) {
        Tensor ga = g;
        for (double& v : ga.data) v *= s;
        tp.accumulate(a, ga);
    });
}

Var leaky_relu(Var a, double slope) {
    Tape& tape = *a.tape;
    const Tensor& av = a.value();
    Tensor out = av;
    for (double& v : out.data) v = v > 0.0 ? v : slope * v;
    require_finite(out, "leaky_relu");
    return tape.push(std::move(out), tape.nodes_[static_cast<size_t>(a.id)].needs_grad, [a, slope](Tape& tp, const Tensor& g) {
        const Tensor& av2 = tp.value(a);
        Tensor ga = g;
        for (size_t i = 0; i < ga.data.size(); ++i)
            if (av2.data[i] <= 0.0) ga.data[i] *= slope;
        tp.accumulate(a, ga);
    });
}

Var concat_cols(Var a, Var b) {
    Tape& tape = *a.tape;
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_matrix(av, "concat_cols");
    require_matrix(bv, "concat_cols");
    if (av.shape[0] != bv.shape[0])
        throw ShapeMismatch("concat_cols: row mismatch " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
    int64_t m = av.shape[0], n1 = av.shape[1], n2 = bv.shape[1];
    Tensor out = Tensor::zeros({m, n1 + n2});
    for (int64_t i = 0; i < m; ++i) {
        std::copy_n(av.data.data() + i * n1, n1, out.data.data() + i * (n1 + n2));
        std::copy_n(bv.data.data() + i * n2, n2, out.data.data() + i * (n1 + n2) + n1);
    }
    bool needs = tape.nodes_[static_cast<size_t>(a.id)].needs_grad || tape.nodes_[static_cast<size_t>(b.id)].needs_grad;
    return tape.push(std::move(out), needs, [a, b, m, n1, n2](Tape& tp, const Tensor& g) {
        if (tp.nodes_[static_cast<size_t>(a.id)].needs_grad) {
            Tensor ga = Tensor::zeros({m, n1});
            for (int64_t i = 0; i < m; ++i) std::copy_n(g.data.data() + i * (n1 + n2), n1, ga.data.data() + i * n1);
            tp.accumulate(a, ga);
        }
        if (tp.nodes_[static_cast<size_t>(b.id)].needs_grad) {
            Tensor gb = Tensor::zeros({m, n2});
            for (int64_t i = 0; i < m; ++i) std::copy_n(g.data.data() + i * (n1 + n2) + n1, n2, gb.data.data() + i * n2);
            tp.accumulate(b, gb);
        }
    });
}

Var edge_features(Var f, const std::vector<int64_t>& graph, int64_t k) {
    Tape& tape = *f.tape;
    const Tensor& fv = f.value();
    require_matrix(fv, "edge_features");
    int64_t n = fv.shape[0], d = fv.shape[1];
    if (static_cast<int64_t>(graph.size()) != n * k) throw ShapeMismatch("edge_features: graph size mismatch");
    for (int64_t idx : graph)
        if (idx < 0 || idx >= n) throw IndexOutOfRange("edge_features: neighbor index out of range");

    Tensor out = Tensor::zeros({n * k, 2 * d});
    for (int64_t i = 0; i < n; ++i) {
        const double* fi = fv.data.data() + i * d;
        for (int64_t e = 0; e < k; ++e) {
            int64_t j = graph[static_cast<size_t>(i * k + e)];
            const double* fj = fv.data.data() + j * d;
            double* row = out.data.data() + (i * k + e) * 2 * d;
            for (int64_t c = 0; c < d; ++c) {
                row[c] = fi[c];
                row[d + c] = fj[c] - fi[c];
            }
        }
    }
    return tape.push(std::move(out), tape.nodes_[static_cast<size_t>(f.id)].needs_grad,
                     [f, graph, k, n, d](Tape& tp, const Tensor& g) {
                         Tensor gf = Tensor::zeros({n, d});
                         for (int64_t i = 0; i < n; ++i) {
                             double* gi = gf.data.data() + i * d;
                             for (int64_t e = 0; e < k; ++e) {
                                 int64_t j = graph[static_cast<size_t>(i * k + e)];
                                 const double* row = g.data.data() + (i * k + e) * 2 * d;
                                 double* gj = gf.data.data() + j * d;
                                 for (int64_t c = 0; c < d; ++c) {
                                     gi[c] += row[c] - row[d + c];
                                     gj[c] += row[d + c];
                                 }
                             }
                         }
                         tp.accumulate(f, gf);
                     });
}

Var group_max(Var a, int64_t group) {
    Tape& tape = *a.tape;
    const Tensor& av = a.value();
    require_matrix(av, "group_max");
    int64_t rows = av.shape[0], d = av.shape[1];
    if (group < 1 || rows % group != 0) throw ShapeMismatch("group_max: rows not divisible by group");
    int64_t n = rows / group;
    Tensor out = Tensor::zeros({n, d});
    std::vector<int64_t> arg(static_cast<size_t>(n * d));
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t c = 0; c < d; ++c) {
            int64_t best = i * group;
            double bv = av.data[static_cast<size_t>(best * d + c)];
            for (int64_t e = 1; e < group; ++e) {
                double v = av.data[static_cast<size_t>((i * group + e) * d + c)];
                if (v > bv) {
                    bv = v;
                    best = i * group + e;
                }
            }
            out.data[static_cast<size_t>(i * d + c)] = bv;
            arg[static_cast<size_t>(i * d + c)] = best;
        }
    }
    return tape.push(std::move(out), tape.nodes_[static_cast<size_t>(a.id)].needs_grad,
                     [a, arg, rows, d, n](Tape& tp, const Tensor& g) {
                         Tensor ga = Tensor::zeros({rows, d});
                         for (int64_t i = 0; i < n; ++i)
                             for (int64_t c = 0; c < d; ++c)
                                 ga.data[static_cast<size_t>(arg[static_cast<size_t>(i * d + c)] * d + c)] +=
                                     g.data[static_cast<size_t>(i * d + c)];
                         tp.accumulate(a, ga);
                     });
}

Var col_max(Var a) {
    const Tensor& av = a.value();
    require_matrix(av, "col_max");
    return group_max(a, av.shape[0]);
}

Var replicate_rows(Var a, int64_t n) {
    Tape& tape = *a.tape;
    const Tensor& av = a.value();
    require_matrix(av, "replicate_rows");
    if (av.shape[0] != 1) throw ShapeMismatch("replicate_rows: expected a single row, got " + shape_str(av.shape));
    int64_t d = av.shape[1];
    Tensor out = Tensor::zeros({n, d});
    for (int64_t i = 0; i < n; ++i) std::copy_n(av.data.data(), d, out.data.data() + i * d);
    return tape.push(std::move(out), tape.nodes_[static_cast<size_t>(a.id)].needs_grad,
                     [a, n, d](Tape& tp, const Tensor& g) {
                         Tensor ga = Tensor::zeros({1, d});
                         for (int64_t i = 0; i < n; ++i)
                             for (int64_t c = 0; c < d; ++c) ga.data[static_cast<size_t>(c)] += g.data[static_cast<size_t>(i * d + c)];
                         tp.accumulate(a, ga);
                     });
}

Var sum_all(Var a) {
    Tape& tape = *a.tape;
    const Tensor& av = a.value();
    double s = 0.0;
    for (double v : av.data) s += v;
    Tensor out = Tensor::scalar(s);
    require_finite(out, "sum_all");
    return tape.push(std::move(out), tape.nodes_[static_cast<size_t>(a.id)].needs_grad,
                     [a](Tape& tp, const Tensor& g) {
                         Tensor ga = Tensor::zeros(tp.value(a).shape);
                         for (double& v : ga.data) v = g.data[0];
                         tp.accumulate(a, ga);
                     });
}

Var chamfer_loss(Var pred, const PointSet6D& target, ChamferReduce reduce, ChamferGrad mode) {
    Tape& tape = *pred.tape;
    const Tensor& pv = pred.value();
    require_matrix(pv, "chamfer_loss");
    if (pv.shape[1] != 6) throw ShapeMismatch("chamfer_loss: prediction must have 6 channels");
    if (target.empty()) throw EmptySet("chamfer_loss: empty target");

    PointSet6D q(pv.data);
    ChamferResult res = chamfer_max(target, q, reduce);
    Tensor out = Tensor::scalar(res.value);
    require_finite(out, "chamfer_loss");
    PointSet6D grad_q = chamfer_grad(target, q, res, reduce, mode);
    return tape.push(std::move(out), tape.nodes_[static_cast<size_t>(pred.id)].needs_grad,
                     [pred, grad_q](Tape& tp, const Tensor& g) {
                         Tensor gp = Tensor::zeros(tp.value(pred).shape);
                         for (size_t i = 0; i < gp.data.size(); ++i) gp.data[i] = g.data[0] * grad_q.data[i];
                         tp.accumulate(pred, gp);
                     });
}

Var cross_entropy(Var logits, const std::vector<int>& labels) {
    Tape& tape = *logits.tape;
    const Tensor& lv = logits.value();
    require_matrix(lv, "cross_entropy");
    int64_t b = lv.shape[0], c = lv.shape[1];
    if (static_cast<int64_t>(labels.size()) != b) throw ShapeMismatch("cross_entropy: label count mismatch");
    for (int y : labels)
        if (y < 0 || y >= c) throw IndexOutOfRange("cross_entropy: label out of range");

    // Stabilized log-softmax; keeps the softmax table for backward.
    Tensor soft = Tensor::zeros({b, c});
    double loss = 0.0;
    for (int64_t i = 0; i < b; ++i) {
        const double* row = lv.data.data() + i * c;
        double m = row[0];
        for (int64_t j = 1; j < c; ++j) m = std::max(m, row[j]);
        double z = 0.0;
        for (int64_t j = 0; j < c; ++j) z += std::exp(row[j] - m);
        double lse = m + std::log(z);
        loss += lse - row[labels[static_cast<size_t>(i)]];
        for (int64_t j = 0; j < c; ++j) soft.data[static_cast<size_t>(i * c + j)] = std::exp(row[j] - lse);
    }
    Tensor out = Tensor::scalar(loss / static_cast<double>(b));
    require_finite(out, "cross_entropy");
    return tape.push(std::move(out), tape.nodes_[static_cast<size_t>(logits.id)].needs_grad,
                     [logits, soft, labels, b, c](Tape& tp, const Tensor& g) {
                         Tensor gl = soft;
                         for (int64_t i = 0; i < b; ++i)
                             gl.data[static_cast<size_t>(i * c + labels[static_cast<size_t>(i)])] -= 1.0;
                         double w = g.data[0] / static_cast<double>(b);
                         for (double& v : gl.data) v *= w;
                         tp.accumulate(logits, gl);
                     });
}

std::vector<int64_t> knn_graph(const Tensor& points, int64_t k) {
    if (points.shape.size() != 2) throw ShapeMismatch("knn_graph: expected a rank-2 tensor");
    int64_t n = points.shape[0], d = points.shape[1];
    if (k < 1 || n <= k) throw TooFewPoints("knn_graph: need more than k=" + std::to_string(k) + " points, got " + std::to_string(n));

    std::vector<int64_t> graph(static_cast<size_t>(n * k));
    std::vector<std::pair<double, int64_t>> cand(static_cast<size_t>(n - 1));
    for (int64_t i = 0; i < n; ++i) {
        const double* pi = points.data.data() + i * d;
        size_t m = 0;
        for (int64_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double* pj = points.data.data() + j * d;
            double s = 0.0;
            for (int64_t c = 0; c < d; ++c) {
                double diff = pi[c] - pj[c];
                s += diff * diff;
            }
            cand[m++] = {s, j};
        }
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        for (int64_t e = 0; e < k; ++e) graph[static_cast<size_t>(i * k + e)] = cand[static_cast<size_t>(e)].second;
    }
    return graph;
}

}  // namespace skelpaint::ad
