#pragma once

#include <cstdint>
#include <vector>

#include "skelpaint/errors.hpp"

namespace skelpaint {

// Flat row-major set of 6D points (x,y,z,r,g,b).
struct PointSet6D {
    std::vector<double> data;

    PointSet6D() = default;
    explicit PointSet6D(std::vector<double> d) : data(std::move(d)) {
        if (data.size() % 6 != 0) throw ShapeMismatch("PointSet6D data must be a multiple of 6");
    }

    static PointSet6D zeros(int64_t n) { return PointSet6D(std::vector<double>(static_cast<size_t>(n) * 6, 0.0)); }

    int64_t size() const { return static_cast<int64_t>(data.size() / 6); }
    bool empty() const { return data.empty(); }
    const double* row(int64_t i) const { return data.data() + i * 6; }
    double* row(int64_t i) { return data.data() + i * 6; }
};

// Exact nearest-neighbor index over 6D points: axis-aligned median splits,
// queries return the same (index, distance) as exhaustive search with the
// lowest-index tie break.
class NNIndex {
  public:
    explicit NNIndex(const PointSet6D& points, int leaf_size = 16);

    // Nearest point to `p` (6 doubles). Ties by lowest point index.
    std::pair<int64_t, double> query(const double* p) const;

    int64_t size() const { return static_cast<int64_t>(order_.size()); }

  private:
    struct Node {
        int axis = -1;          // -1 marks a leaf
        double split = 0.0;
        int32_t left = -1, right = -1;
        int32_t begin = 0, end = 0;  // leaf range into order_
    };

    int32_t build(int32_t begin, int32_t end, int leaf_size);
    void search(int32_t node, const double* p, double& best_d2, int64_t& best_idx) const;

    std::vector<double> pts_;     // copy of the indexed points, row-major
    std::vector<int64_t> order_;  // point indices, permuted by the build
    std::vector<Node> nodes_;
    int32_t root_ = -1;
};

struct DirectedResult {
    double value = 0.0;               // mean nearest-neighbor distance
    std::vector<int64_t> matches;     // per source point, index of nearest target
    std::vector<double> distances;    // per source point, that distance
};

struct ChamferResult {
    double value = 0.0;  // max(A, B) (or A + B under the sum variant)
    double A = 0.0;      // directed average P -> Q
    double B = 0.0;      // directed average Q -> P
    std::vector<int64_t> match_pq;  // per P point, nearest index in Q
    std::vector<int64_t> match_qp;  // per Q point, nearest index in P
};

// How the two directed averages combine. Max is the default; Sum exists for
// ablation only.
enum class ChamferReduce { Max, Sum };

// Gradient routing for the Max reduction: Branch follows the selected branch
// (the true subgradient, ties resolving to A); Smooth averages both branches.
enum class ChamferGrad { Branch, Smooth };

// Mean over P of the distance to the nearest point of Q (6D Euclidean).
DirectedResult directed_avg_min(const PointSet6D& P, const PointSet6D& Q);
DirectedResult directed_avg_min_brute(const PointSet6D& P, const PointSet6D& Q);
// Variant reusing a prebuilt index over Q.
DirectedResult directed_avg_min(const PointSet6D& P, const NNIndex& q_index);

ChamferResult chamfer_max(const PointSet6D& P, const PointSet6D& Q, ChamferReduce reduce = ChamferReduce::Max);
ChamferResult chamfer_max_brute(const PointSet6D& P, const PointSet6D& Q, ChamferReduce reduce = ChamferReduce::Max);

// Gradient of the chamfer value w.r.t. every coordinate of Q, with P held
// fixed. Zero-distance matches contribute zero. Requires the matching
// computed by chamfer_max (or chamfer_max_brute).
PointSet6D chamfer_grad(const PointSet6D& P, const PointSet6D& Q, const ChamferResult& res,
                        ChamferReduce reduce = ChamferReduce::Max, ChamferGrad mode = ChamferGrad::Branch);

}  // namespace skelpaint
