#include "skelpaint/network.hpp"

#include <cmath>

#include "skelpaint/errors.hpp"

namespace skelpaint {

Tensor& ParamPack::find(const std::string& name) {
    for (auto& it : items)
        if (it.name == name) return it.value;
    throw ShapeMismatch("parameter not found: " + name);
}

const Tensor& ParamPack::find(const std::string& name) const {
    for (const auto& it : items)
        if (it.name == name) return it.value;
    throw ShapeMismatch("parameter not found: " + name);
}

int64_t ParamPack::total_size() const {
    int64_t n = 0;
    for (const auto& it : items) n += it.value.numel();
    return n;
}

EncoderConfig EncoderConfig::full_scale() {
    EncoderConfig c;
    c.k = 20;
    c.block_widths = {64, 64, 128};
    c.feature_dim = 1024;
    return c;
}

DecoderConfig DecoderConfig::full_scale() {
    DecoderConfig c;
    c.grid_side = 45;  // 2025 grid points >= the 2000-point cloud
    c.hidden_width = 512;
    return c;
}

int64_t grid_side_for(int64_t n) {
    int64_t g = static_cast<int64_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    while (g * g < n) ++g;
    return std::max<int64_t>(g, 1);
}

namespace {

Tensor init_uniform(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

void add_linear(ParamPack& pack, const std::string& prefix, int64_t in, int64_t out, Rng& rng) {
    pack.items.push_back({prefix + ".weight", init_uniform({in, out}, in, rng)});
    pack.items.push_back({prefix + ".bias", init_uniform({1, out}, in, rng)});
}

}  // namespace

RepaintModel make_repaint_model(ColorScheme scheme, const EncoderConfig& enc, const DecoderConfig& dec, Rng rng) {
    if (enc.block_widths.empty()) throw ShapeMismatch("encoder needs at least one edge-conv block");
    if (dec.grid_side < 1) throw ShapeMismatch("decoder grid side must be >= 1");

    RepaintModel m;
    m.scheme = scheme;
    m.enc = enc;
    m.dec = dec;

    Rng r = rng.fork("init");
    int64_t d = 6;
    int64_t concat = 0;
    for (size_t b = 0; b < enc.block_widths.size(); ++b) {
        int64_t w = enc.block_widths[b];
        add_linear(m.params, "enc.block" + std::to_string(b), 2 * d, w, r);
        d = w;
        concat += w;
    }
    add_linear(m.params, "enc.proj", concat, enc.feature_dim, r);

    int64_t f = enc.feature_dim;
    int64_t h = dec.hidden_width;
    add_linear(m.params, "dec.fold1.l0", f + 2, h, r);
    add_linear(m.params, "dec.fold1.l1", h, h, r);
    add_linear(m.params, "dec.fold1.l2", h, 6, r);
    add_linear(m.params, "dec.fold2.l0", f + 6, h, r);
    add_linear(m.params, "dec.fold2.l1", h, h, r);
    add_linear(m.params, "dec.fold2.l2", h, 6, r);
    return m;
}

std::vector<ad::Var> bind_params(ad::Tape& tape, const ParamPack& pack) {
    std::vector<ad::Var> vars;
    vars.reserve(pack.items.size());
    for (const auto& it : pack.items) vars.push_back(tape.leaf(it.value));
    return vars;
}

ad::Var edge_conv(ad::Var features, const std::vector<int64_t>& graph, int64_t k, ad::Var weight, ad::Var bias,
                  double leaky_slope) {
    ad::Var e = ad::edge_features(features, graph, k);
    e = ad::add_rowwise(ad::matmul(e, weight), bias);
    e = ad::leaky_relu(e, leaky_slope);
    return ad::group_max(e, k);
}

namespace {

Tensor cloud_matrix(const PointSet6D& cloud) {
    return Tensor({cloud.size(), 6}, cloud.data);
}

}  // namespace

ad::Var encode(ad::Tape& tape, const RepaintModel& model, const std::vector<ad::Var>& pvars, const PointSet6D& cloud) {
    if (cloud.size() < model.enc.k + 1)
        throw TooFewPoints("encode: cloud has " + std::to_string(cloud.size()) + " points, need > k=" +
                           std::to_string(model.enc.k));

    ad::Var h = tape.constant(cloud_matrix(cloud));
    std::vector<ad::Var> blocks;
    size_t p = 0;
    for (size_t b = 0; b < model.enc.block_widths.size(); ++b) {
        // Graph over the current feature space (block 0 sees the raw cloud).
        std::vector<int64_t> graph = ad::knn_graph(h.value(), model.enc.k);
        h = edge_conv(h, graph, model.enc.k, pvars[p], pvars[p + 1], model.enc.leaky_slope);
        p += 2;
        blocks.push_back(h);
    }
    ad::Var cat = blocks[0];
    for (size_t b = 1; b < blocks.size(); ++b) cat = ad::concat_cols(cat, blocks[b]);
    ad::Var proj = ad::leaky_relu(ad::add_rowwise(ad::matmul(cat, pvars[p]), pvars[p + 1]), model.enc.leaky_slope);
    return ad::col_max(proj);
}

Tensor folding_grid(const DecoderConfig& dec) {
    int64_t g = dec.grid_side;
    double e = dec.grid_extent;
    Tensor grid = Tensor::zeros({g * g, 2});
    for (int64_t a = 0; a < g; ++a) {
        double u = g == 1 ? 0.0 : -e + 2.0 * e * static_cast<double>(a) / static_cast<double>(g - 1);
        for (int64_t b = 0; b < g; ++b) {
            double v = g == 1 ? 0.0 : -e + 2.0 * e * static_cast<double>(b) / static_cast<double>(g - 1);
            grid.data[static_cast<size_t>((a * g + b) * 2)] = u;
            grid.data[static_cast<size_t>((a * g + b) * 2 + 1)] = v;
        }
    }
    return grid;
}

namespace {

ad::Var folding_mlp(ad::Var x, const std::vector<ad::Var>& pvars, size_t p) {
    x = ad::add_rowwise(ad::matmul(x, pvars[p]), pvars[p + 1]);
    x = ad::leaky_relu(x, 0.0);
    x = ad::add_rowwise(ad::matmul(x, pvars[p + 2]), pvars[p + 3]);
    x = ad::leaky_relu(x, 0.0);
    return ad::add_rowwise(ad::matmul(x, pvars[p + 4]), pvars[p + 5]);
}

}  // namespace

ad::Var decode(ad::Tape& tape, const RepaintModel& model, const std::vector<ad::Var>& pvars, ad::Var feature) {
    int64_t n = model.output_points();
    size_t p = 2 * model.enc.block_widths.size() + 2;  // decoder params start here
    ad::Var grid = tape.constant(folding_grid(model.dec));
    ad::Var rep = ad::replicate_rows(feature, n);
    ad::Var fold1 = folding_mlp(ad::concat_cols(grid, rep), pvars, p);
    ad::Var fold2 = folding_mlp(ad::concat_cols(fold1, rep), pvars, p + 6);
    return fold2;
}

ad::Var forward_repaint(ad::Tape& tape, const RepaintModel& model, const std::vector<ad::Var>& pvars,
                        const PointSet6D& cloud) {
    return decode(tape, model, pvars, encode(tape, model, pvars, cloud));
}

Tensor encode_features(const RepaintModel& model, const PointSet6D& cloud) {
    ad::Tape tape;
    std::vector<ad::Var> pvars;
    pvars.reserve(model.params.items.size());
    for (const auto& it : model.params.items) pvars.push_back(tape.constant(it.value));
    return encode(tape, model, pvars, cloud).value();
}

PointSet6D repaint(const RepaintModel& model, const PointSet6D& cloud) {
    ad::Tape tape;
    std::vector<ad::Var> pvars;
    pvars.reserve(model.params.items.size());
    for (const auto& it : model.params.items) pvars.push_back(tape.constant(it.value));
    ad::Var out = forward_repaint(tape, model, pvars, cloud);
    return PointSet6D(out.value().data);
}

}  // namespace skelpaint
