#pragma once

#include <string>
#include <vector>

#include "skelpaint/autodiff.hpp"
#include "skelpaint/colorize.hpp"
#include "skelpaint/rng.hpp"
#include "skelpaint/tensor.hpp"

namespace skelpaint {

struct NamedTensor {
    std::string name;
    Tensor value;
};

// Flat, ordered collection of named parameter tensors. Order is the
// architecture's construction order and is part of the checkpoint contract.
struct ParamPack {
    std::vector<NamedTensor> items;

    Tensor& find(const std::string& name);
    const Tensor& find(const std::string& name) const;
    int64_t total_size() const;
};

// Graph-convolution encoder: a stack of edge-conv blocks over a k-NN graph
// recomputed in feature space, block outputs concatenated, projected to the
// feature dimension and max-pooled over points.
struct EncoderConfig {
    int64_t k = 6;
    std::vector<int64_t> block_widths = {16, 16, 32};
    int64_t feature_dim = 128;
    double leaky_slope = 0.2;

    // Full-scale backbone: k=20, blocks 64/64/128, feature 1024.
    static EncoderConfig full_scale();
};

// Folding decoder: a fixed G x G grid in [-extent, extent]^2 is concatenated
// with the replicated codeword and pushed through two 3-layer MLPs, each
// ending in 6 output channels (position + color).
struct DecoderConfig {
    int64_t grid_side = 8;
    int64_t hidden_width = 64;
    double grid_extent = 0.3;

    static DecoderConfig full_scale();
};

// One colorization stream's autoencoder. Streams never share parameters.
struct RepaintModel {
    ColorScheme scheme = ColorScheme::Temporal;
    EncoderConfig enc;
    DecoderConfig dec;
    ParamPack params;

    int64_t output_points() const { return dec.grid_side * dec.grid_side; }
};

// Fresh model with weights and biases drawn uniform in +-1/sqrt(fan_in).
RepaintModel make_repaint_model(ColorScheme scheme, const EncoderConfig& enc, const DecoderConfig& dec, Rng rng);

// Smallest grid side with G*G >= n.
int64_t grid_side_for(int64_t n);

// Parameters registered on a tape as differentiable leaves, in pack order.
std::vector<ad::Var> bind_params(ad::Tape& tape, const ParamPack& pack);

// Edge convolution: per edge MLP(concat(f_i, f_j - f_i)) through one linear
// layer + leaky ReLU, then channelwise max over each point's k edges.
ad::Var edge_conv(ad::Var features, const std::vector<int64_t>& graph, int64_t k, ad::Var weight, ad::Var bias,
                  double leaky_slope);

// Forward passes on an existing tape; `pvars` must come from bind_params on
// the same tape. The cloud enters as a constant (N,6) matrix.
ad::Var encode(ad::Tape& tape, const RepaintModel& model, const std::vector<ad::Var>& pvars, const PointSet6D& cloud);
ad::Var decode(ad::Tape& tape, const RepaintModel& model, const std::vector<ad::Var>& pvars, ad::Var feature);
ad::Var forward_repaint(ad::Tape& tape, const RepaintModel& model, const std::vector<ad::Var>& pvars,
                        const PointSet6D& cloud);

// Gradient-free forward passes for inference.
Tensor encode_features(const RepaintModel& model, const PointSet6D& cloud);
PointSet6D repaint(const RepaintModel& model, const PointSet6D& cloud);

// The decoder's constant 2D seed grid, row-major, G*G rows.
Tensor folding_grid(const DecoderConfig& dec);

}  // namespace skelpaint
