#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "skelpaint/chamfer.hpp"
#include "skelpaint/parallel.hpp"
#include "skelpaint/rng.hpp"

using namespace skelpaint;

namespace {

PointSet6D make_set(std::initializer_list<std::initializer_list<double>> rows) {
    std::vector<double> data;
    for (const auto& r : rows) {
        REQUIRE(r.size() == 6);
        data.insert(data.end(), r.begin(), r.end());
    }
    return PointSet6D(std::move(data));
}

PointSet6D random_set(int64_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    PointSet6D s = PointSet6D::zeros(n);
    for (double& v : s.data) v = rng.uniform(lo, hi);
    return s;
}

// Central finite differences of the chamfer value w.r.t. Q.
PointSet6D fd_gradient(const PointSet6D& P, const PointSet6D& Q, double step) {
    PointSet6D g = PointSet6D::zeros(Q.size());
    PointSet6D q = Q;
    for (size_t i = 0; i < q.data.size(); ++i) {
        double keep = q.data[i];
        q.data[i] = keep + step;
        double up = chamfer_max_brute(P, q).value;
        q.data[i] = keep - step;
        double down = chamfer_max_brute(P, q).value;
        q.data[i] = keep;
        g.data[i] = (up - down) / (2.0 * step);
    }
    return g;
}

}  // namespace

TEST_CASE("directed_avg_min on hand-checked sets") {
    PointSet6D p = make_set({{0, 0, 0, 0, 0, 0}, {2, 0, 0, 0, 0, 0}});
    PointSet6D q = make_set({{0, 0, 0, 0, 0, 0}});
    DirectedResult r = directed_avg_min(p, q);
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-15));  // (0 + 2) / 2
    REQUIRE(r.matches.size() == 2);
    CHECK(r.matches[0] == 0);
    CHECK(r.matches[1] == 0);
}

TEST_CASE("directed_avg_min of a set with itself is zero with identity matches") {
    Rng rng(21);
    PointSet6D p = random_set(17, rng);
    DirectedResult r = directed_avg_min(p, p);
    CHECK(r.value == 0.0);
    for (int64_t i = 0; i < p.size(); ++i) CHECK(r.matches[static_cast<size_t>(i)] == i);
}

TEST_CASE("distances run over all six channels jointly") {
    PointSet6D p = make_set({{0, 0, 0, 1, 0, 0}});
    PointSet6D q = make_set({{0, 0, 0, 0, 0, 1}});
    DirectedResult r = directed_avg_min(p, q);
    CHECK(r.value == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("directed_avg_min rejects empty sets") {
    PointSet6D p = make_set({{0, 0, 0, 0, 0, 0}});
    PointSet6D empty;
    CHECK_THROWS_AS(directed_avg_min(p, empty), EmptySet);
    CHECK_THROWS_AS(directed_avg_min(empty, p), EmptySet);
    CHECK_THROWS_AS(chamfer_max(empty, p), EmptySet);
}

TEST_CASE("chamfer_max combines the directed averages with max") {
    PointSet6D p = make_set({{0, 0, 0, 0, 0, 0}, {2, 0, 0, 0, 0, 0}});
    PointSet6D q = make_set({{0, 0, 0, 0, 0, 0}});
    ChamferResult r = chamfer_max(p, q);
    CHECK(r.A == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.B == 0.0);
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-15));

    ChamferResult swapped = chamfer_max(q, p);
    CHECK(swapped.value == r.value);

    ChamferResult self = chamfer_max(p, p);
    CHECK(self.value == 0.0);
}

TEST_CASE("sum variant adds the directed averages") {
    Rng rng(5);
    PointSet6D p = random_set(9, rng);
    PointSet6D q = random_set(13, rng);
    ChamferResult mx = chamfer_max(p, q, ChamferReduce::Max);
    ChamferResult sm = chamfer_max(p, q, ChamferReduce::Sum);
    CHECK(sm.value == doctest::Approx(mx.A + mx.B).epsilon(1e-15));
    CHECK(mx.value == std::max(mx.A, mx.B));
}

TEST_CASE("NNIndex single point and duplicate tie-break") {
    PointSet6D one = make_set({{1, 2, 3, 0, 0, 0}});
    NNIndex idx(one);
    double probe[6] = {0, 0, 0, 0, 0, 0};
    CHECK(idx.query(probe).first == 0);

    // duplicates at indices 3 and 7: query at that location returns 3
    PointSet6D dup = PointSet6D::zeros(9);
    Rng rng(33);
    for (double& v : dup.data) v = rng.uniform(-1, 1);
    for (int c = 0; c < 6; ++c) {
        dup.data[3 * 6 + c] = 0.25;
        dup.data[7 * 6 + c] = 0.25;
    }
    NNIndex idx2(dup);
    double probe2[6] = {0.25, 0.25, 0.25, 0.25, 0.25, 0.25};
    CHECK(idx2.query(probe2).first == 3);
}

TEST_CASE("NNIndex agrees with exhaustive search on random queries") {
    Rng rng(101);
    PointSet6D points = random_set(1000, rng);
    NNIndex index(points);
    for (int trial = 0; trial < 1000; ++trial) {
        double probe[6];
        for (double& v : probe) v = rng.uniform(-1.2, 1.2);
        auto [qi, qd] = index.query(probe);
        // exhaustive scan with lowest-index tie-break
        int64_t best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (int64_t i = 0; i < points.size(); ++i) {
            double d2 = 0.0;
            for (int c = 0; c < 6; ++c) {
                double d = probe[c] - points.row(i)[c];
                d2 += d * d;
            }
            if (d2 < best_d2) {
                best_d2 = d2;
                best = i;
            }
        }
        CHECK(qi == best);
        CHECK(qd == std::sqrt(best_d2));
    }
}

TEST_CASE("indexed chamfer equals brute force bit-for-bit on random pairs") {
    Rng rng(202);
    for (int trial = 0; trial < 40; ++trial) {
        int64_t np = 1 + static_cast<int64_t>(rng.below(512));
        int64_t nq = 1 + static_cast<int64_t>(rng.below(512));
        PointSet6D p = random_set(np, rng);
        PointSet6D q = random_set(nq, rng);
        ChamferResult fast = chamfer_max(p, q);
        ChamferResult slow = chamfer_max_brute(p, q);
        CHECK(std::abs(fast.value - slow.value) <= 1e-12);
        CHECK(fast.match_pq == slow.match_pq);
        CHECK(fast.match_qp == slow.match_qp);
    }
}

TEST_CASE("chamfer value is symmetric, non-negative, and max dominates the mean") {
    Rng rng(303);
    for (int trial = 0; trial < 30; ++trial) {
        PointSet6D p = random_set(1 + static_cast<int64_t>(rng.below(64)), rng);
        PointSet6D q = random_set(1 + static_cast<int64_t>(rng.below(64)), rng);
        ChamferResult r = chamfer_max(p, q);
        CHECK(r.value >= 0.0);
        CHECK(chamfer_max(q, p).value == r.value);
        CHECK(r.value >= (r.A + r.B) / 2.0);
    }
}

TEST_CASE("chamfer value is zero iff the sets mutually coincide") {
    PointSet6D p = make_set({{0, 0, 0, 0, 0, 0}, {1, 1, 1, 0, 0, 0}});
    PointSet6D q = make_set({{1, 1, 1, 0, 0, 0}, {0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0}});
    CHECK(chamfer_max(p, q).value == 0.0);  // every point covered both ways

    PointSet6D r = make_set({{0, 0, 0, 0, 0, 0}});
    CHECK(chamfer_max(p, r).value > 0.0);  // (1,1,1) uncovered
}

TEST_CASE("translation of both sets leaves the value unchanged") {
    Rng rng(404);
    for (int trial = 0; trial < 10; ++trial) {
        PointSet6D p = random_set(20, rng);
        PointSet6D q = random_set(25, rng);
        double shift[6];
        for (double& v : shift) v = rng.uniform(-3, 3);
        PointSet6D p2 = p, q2 = q;
        for (int64_t i = 0; i < p2.size(); ++i)
            for (int c = 0; c < 6; ++c) p2.row(i)[c] += shift[c];
        for (int64_t i = 0; i < q2.size(); ++i)
            for (int c = 0; c < 6; ++c) q2.row(i)[c] += shift[c];
        CHECK(std::abs(chamfer_max(p, q).value - chamfer_max(p2, q2).value) <= 1e-12);
    }
}

TEST_CASE("chamfer_grad on a single displaced point is the unit vector") {
    PointSet6D p = make_set({{0, 0, 0, 0, 0, 0}});
    PointSet6D q = make_set({{1, 0, 0, 0, 0, 0}});
    ChamferResult res = chamfer_max(p, q);
    PointSet6D g = chamfer_grad(p, q, res);
    CHECK(g.data[0] == doctest::Approx(1.0).epsilon(1e-15));
    for (int c = 1; c < 6; ++c) CHECK(g.data[static_cast<size_t>(c)] == 0.0);
}

TEST_CASE("chamfer_grad is zero when prediction equals target") {
    Rng rng(7);
    PointSet6D p = random_set(12, rng);
    ChamferResult res = chamfer_max(p, p);
    PointSet6D g = chamfer_grad(p, p, res);
    for (double v : g.data) CHECK(v == 0.0);
}

TEST_CASE("chamfer_grad matches finite differences away from branch ties") {
    Rng rng(909);
    const double step = 1e-5;
    int checked = 0;
    int attempts = 0;
    while (checked < 100 && attempts < 2000) {
        ++attempts;
        PointSet6D p = random_set(5, rng);
        PointSet6D q = random_set(5, rng);
        ChamferResult res = chamfer_max_brute(p, q);
        if (std::abs(res.A - res.B) < 1e-6) continue;  // branch tie
        bool tiny = false;
        for (int64_t i = 0; i < p.size() && !tiny; ++i) {
            const double* pv = p.row(i);
            const double* qv = q.row(res.match_pq[static_cast<size_t>(i)]);
            double d = 0.0;
            for (int c = 0; c < 6; ++c) d += (pv[c] - qv[c]) * (pv[c] - qv[c]);
            if (std::sqrt(d) < 1e-6) tiny = true;
        }
        for (int64_t i = 0; i < q.size() && !tiny; ++i) {
            const double* qv = q.row(i);
            const double* pv = p.row(res.match_qp[static_cast<size_t>(i)]);
            double d = 0.0;
            for (int c = 0; c < 6; ++c) d += (pv[c] - qv[c]) * (pv[c] - qv[c]);
            if (std::sqrt(d) < 1e-6) tiny = true;
        }
        if (tiny) continue;

        PointSet6D analytic = chamfer_grad(p, q, res);
        PointSet6D numeric = fd_gradient(p, q, step);
        for (size_t i = 0; i < analytic.data.size(); ++i) {
            double a = analytic.data[i], n = numeric.data[i];
            double denom = std::max({std::abs(a), std::abs(n), 1e-7});
            CHECK(std::abs(a - n) / denom < 1e-4);
        }
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("sum-variant gradient matches finite differences of the sum value") {
    Rng rng(111);
    const double step = 1e-5;
    int checked = 0, attempts = 0;
    while (checked < 20 && attempts < 400) {
        ++attempts;
        PointSet6D p = random_set(4, rng);
        PointSet6D q = random_set(6, rng);
        ChamferResult res = chamfer_max_brute(p, q, ChamferReduce::Sum);
        PointSet6D analytic = chamfer_grad(p, q, res, ChamferReduce::Sum);
        PointSet6D numeric = PointSet6D::zeros(q.size());
        PointSet6D probe = q;
        bool usable = true;
        for (size_t i = 0; i < probe.data.size(); ++i) {
            double keep = probe.data[i];
            probe.data[i] = keep + step;
            auto up = chamfer_max_brute(p, probe, ChamferReduce::Sum);
            probe.data[i] = keep - step;
            auto down = chamfer_max_brute(p, probe, ChamferReduce::Sum);
            probe.data[i] = keep;
            if (up.match_pq != res.match_pq || down.match_pq != res.match_pq) usable = false;
            numeric.data[i] = (up.value - down.value) / (2.0 * step);
        }
        if (!usable) continue;
        for (size_t i = 0; i < analytic.data.size(); ++i) {
            double denom = std::max({std::abs(analytic.data[i]), std::abs(numeric.data[i]), 1e-7});
            CHECK(std::abs(analytic.data[i] - numeric.data[i]) / denom < 1e-4);
        }
        ++checked;
    }
    CHECK(checked == 20);
}

TEST_CASE("results do not depend on the worker thread cap") {
    Rng rng(777);
    PointSet6D p = random_set(300, rng);
    PointSet6D q = random_set(257, rng);
    set_max_threads(1);
    ChamferResult serial = chamfer_max(p, q);
    set_max_threads(4);
    ChamferResult threaded = chamfer_max(p, q);
    set_max_threads(0);
    CHECK(serial.value == threaded.value);
    CHECK(serial.A == threaded.A);
    CHECK(serial.B == threaded.B);
    CHECK(serial.match_pq == threaded.match_pq);
}

TEST_CASE("worker exceptions propagate out of parallel sections") {
    set_max_threads(4);
    bool caught = false;
    try {
        parallel_for(64, [](size_t i) {
            if (i == 17) throw EmptySet("boom");
        });
    } catch (const EmptySet&) {
        caught = true;
    }
    set_max_threads(0);
    CHECK(caught);
}
