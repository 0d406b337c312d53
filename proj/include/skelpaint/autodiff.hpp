#pragma once

#include <functional>
#include <vector>

#include "skelpaint/chamfer.hpp"
#include "skelpaint/tensor.hpp"

namespace skelpaint::ad {

class Tape;

// Handle to a tape node. Cheap to copy; valid while its tape is alive.
struct Var {
    Tape* tape = nullptr;
    int32_t id = -1;

    const Tensor& value() const;
    const Tensor& grad() const;
};

// Reverse-mode gradient tape. Built fresh per training step: forward ops
// append nodes, backward() walks them in reverse. Values are never mutated
// after creation. Every op validates that its outputs are finite and throws
// NaNDetected otherwise; backward() re-checks the propagated gradients.
class Tape {
  public:
    Var leaf(const Tensor& value);      // differentiable input (parameters)
    Var constant(const Tensor& value);  // non-differentiable input

    // Accumulates d(loss)/d(node) for every node reachable from `loss`,
    // which must be a scalar (numel 1).
    void backward(Var loss);

    const Tensor& value(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
    const Tensor& grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].grad; }

    size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        std::function<void(Tape&, const Tensor&)> backprop;  // grad of this node -> parents
    };

    Var push(Tensor value, bool needs_grad, std::function<void(Tape&, const Tensor&)> backprop);
    void accumulate(Var v, const Tensor& g);

    std::vector<Node> nodes_;

    friend Var matmul(Var a, Var b);
    friend Var add(Var a, Var b);
    friend Var add_rowwise(Var a, Var bias);
    friend Var scale(Var a, double s);
    friend Var leaky_relu(Var a, double slope);
    friend Var concat_cols(Var a, Var b);
    friend Var edge_features(Var f, const std::vector<int64_t>& graph, int64_t k);
    friend Var group_max(Var a, int64_t group);
    friend Var col_max(Var a);
    friend Var replicate_rows(Var a, int64_t n);
    friend Var sum_all(Var a);
    friend Var chamfer_loss(Var pred, const PointSet6D& target, ChamferReduce reduce, ChamferGrad mode);
    friend Var cross_entropy(Var logits, const std::vector<int>& labels);
};

// (m,k)x(k,n) -> (m,n)
Var matmul(Var a, Var b);
// Elementwise sum of equal shapes.
Var add(Var a, Var b);
// Adds a length-n bias to every row of an (m,n) matrix.
Var add_rowwise(Var a, Var bias);
Var scale(Var a, double s);
// slope 0 gives plain ReLU.
Var leaky_relu(Var a, double slope = 0.0);
// (m,n1) ++ (m,n2) -> (m, n1+n2)
Var concat_cols(Var a, Var b);
// f: (N,D); graph: N*k neighbor indices, row-major. Output row i*k+e holds
// [f_i, f_j - f_i] for the e-th neighbor j of point i: shape (N*k, 2D).
Var edge_features(Var f, const std::vector<int64_t>& graph, int64_t k);
// (N*group, D) -> (N, D), channelwise max over each consecutive group.
Var group_max(Var a, int64_t group);
// (N, D) -> (1, D), channelwise max over all rows.
Var col_max(Var a);
// (1, D) -> (n, D)
Var replicate_rows(Var a, int64_t n);
// -> scalar
Var sum_all(Var a);
// Chamfer distance between a fixed target set and the predicted rows of a
// (N,6) node; scalar. Backward uses the analytic chamfer gradient.
Var chamfer_loss(Var pred, const PointSet6D& target, ChamferReduce reduce = ChamferReduce::Max,
                 ChamferGrad mode = ChamferGrad::Branch);
// Mean cross-entropy over rows of (B,C) logits with stabilized log-softmax.
Var cross_entropy(Var logits, const std::vector<int>& labels);

// k nearest rows to each row (Euclidean), self excluded, ties by lowest
// index. Returns row-major (N,k) indices. Not differentiated.
std::vector<int64_t> knn_graph(const Tensor& points, int64_t k);

}  // namespace skelpaint::ad
