#include "skelpaint/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "skelpaint/parallel.hpp"

namespace skelpaint {

const char* input_mode_name(InputMode m) { return m == InputMode::Raw ? "raw" : "hint"; }

InputMode input_mode_from_name(const std::string& name) {
    if (name == "raw") return InputMode::Raw;
    if (name == "hint") return InputMode::Hint;
    throw IndexOutOfRange("unknown input mode: " + name);
}

Dataset load_dataset(const DatasetManifest& manifest, int frames, int root_joint) {
    Dataset out;
    out.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        LabeledSample s;
        s.seq = sample_frames(normalize_sequence(parse_sequence(e.path), root_joint), frames);
        s.seq.meta.label = e.label;
        s.seq.meta.subject = e.subject;
        s.seq.meta.view = e.view;
        s.label_value = e.label;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<SkeletonSequence> strip_labels(const Dataset& data) {
    std::vector<SkeletonSequence> out;
    out.reserve(data.size());
    for (const auto& s : data) {
        SkeletonSequence seq = s.seq;
        seq.meta.label.reset();  // no label survives into pretraining
        out.push_back(std::move(seq));
    }
    return out;
}

double cosine_lr(int step, int total, double lr_max, double lr_min) {
    if (total < 1) throw IndexOutOfRange("cosine_lr: total must be >= 1");
    if (step < 0 || step > total) throw IndexOutOfRange("cosine_lr: step outside [0, total]");
    double c = std::cos(3.14159265358979323846 * static_cast<double>(step) / static_cast<double>(total));
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + c);
}

void adam_step(ParamPack& params, const std::vector<Tensor>& grads, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
    if (grads.size() != params.items.size()) throw ShapeMismatch("adam_step: gradient count mismatch");
    if (state.m.empty()) {
        for (const auto& it : params.items) {
            state.m.push_back(Tensor::zeros(it.value.shape));
            state.v.push_back(Tensor::zeros(it.value.shape));
        }
    }
    state.t += 1;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (size_t p = 0; p < params.items.size(); ++p) {
        Tensor& w = params.items[p].value;
        const Tensor& g = grads[p];
        if (!w.same_shape(g)) throw ShapeMismatch("adam_step: shape mismatch for " + params.items[p].name);
        Tensor& m = state.m[p];
        Tensor& v = state.v[p];
        for (size_t i = 0; i < w.data.size(); ++i) {
            m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * g.data[i];
            v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * g.data[i] * g.data[i];
            double mhat = m.data[i] / bc1;
            double vhat = v.data[i] / bc2;
            w.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

void nesterov_sgd_step(ParamPack& params, const std::vector<Tensor>& grads, NesterovState& state, double lr,
                       double momentum) {
    if (grads.size() != params.items.size()) throw ShapeMismatch("nesterov_sgd_step: gradient count mismatch");
    if (state.velocity.empty())
        for (const auto& it : params.items) state.velocity.push_back(Tensor::zeros(it.value.shape));
    for (size_t p = 0; p < params.items.size(); ++p) {
        Tensor& w = params.items[p].value;
        const Tensor& g = grads[p];
        if (!w.same_shape(g)) throw ShapeMismatch("nesterov_sgd_step: shape mismatch for " + params.items[p].name);
        Tensor& v = state.velocity[p];
        for (size_t i = 0; i < w.data.size(); ++i) {
            v.data[i] = momentum * v.data[i] + g.data[i];
            w.data[i] -= lr * (g.data[i] + momentum * v.data[i]);
        }
    }
}

namespace {

PointSet6D cloud_to_pointset(const SkeletonCloud& cloud) {
    PointSet6D out = PointSet6D::zeros(static_cast<int64_t>(cloud.points.size()));
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        double* row = out.row(static_cast<int64_t>(i));
        row[0] = cloud.points[i].x;
        row[1] = cloud.points[i].y;
        row[2] = cloud.points[i].z;
    }
    return out;
}

PointSet6D colorized_to_pointset(const ColorizedCloud& cloud) {
    PointSet6D out = PointSet6D::zeros(static_cast<int64_t>(cloud.points.size()));
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        double* row = out.row(static_cast<int64_t>(i));
        row[0] = cloud.points[i].x;
        row[1] = cloud.points[i].y;
        row[2] = cloud.points[i].z;
        row[3] = cloud.colors[i].r;
        row[4] = cloud.colors[i].g;
        row[5] = cloud.colors[i].b;
    }
    return out;
}

}  // namespace

PointSet6D stream_input(const StreamModel& stream, const SkeletonSequence& seq) {
    SkeletonCloud cloud = build_cloud(seq);
    if (stream.input_mode == InputMode::Raw) return cloud_to_pointset(cloud);
    return colorized_to_pointset(apply_color_mask(colorize_cloud(cloud, stream.model.scheme), stream.mask_ratio));
}

PointSet6D repaint_target(const SkeletonSequence& seq, ColorScheme scheme) {
    return colorized_to_pointset(colorize_cloud(build_cloud(seq), scheme));
}

namespace {

// Sum of per-item gradients for one batch, accumulated in item order.
struct BatchGrads {
    std::vector<Tensor> total;
    double loss_sum = 0.0;
};

BatchGrads batch_backward(const RepaintModel& model, const std::vector<const PointSet6D*>& inputs,
                          const std::vector<const PointSet6D*>& targets, ChamferReduce reduce, ChamferGrad mode) {
    size_t b = inputs.size();
    std::vector<std::vector<Tensor>> item_grads(b);
    std::vector<double> item_loss(b, 0.0);
    // Items are independent; each gets its own tape. Reduction below is in
    // index order, so the result does not depend on the thread count.
    parallel_for(b, [&](size_t i) {
        ad::Tape tape;
        std::vector<ad::Var> pvars = bind_params(tape, model.params);
        ad::Var pred = forward_repaint(tape, model, pvars, *inputs[i]);
        ad::Var loss = ad::chamfer_loss(pred, *targets[i], reduce, mode);
        tape.backward(loss);
        item_loss[i] = loss.value().data[0];
        item_grads[i].reserve(pvars.size());
        for (const ad::Var& v : pvars) item_grads[i].push_back(v.grad());
    });

    BatchGrads out;
    for (const auto& it : model.params.items) out.total.push_back(Tensor::zeros(it.value.shape));
    for (size_t i = 0; i < b; ++i) {
        out.loss_sum += item_loss[i];
        for (size_t p = 0; p < out.total.size(); ++p)
            for (size_t x = 0; x < out.total[p].data.size(); ++x) out.total[p].data[x] += item_grads[i][p].data[x];
    }
    return out;
}

}  // namespace

PretrainResult pretrain_stream(const std::vector<SkeletonSequence>& data, const PretrainConfig& config) {
    if (data.empty()) throw EmptySet("pretrain_stream: empty dataset");
    if (config.epochs < 0) throw IndexOutOfRange("pretrain_stream: negative epoch count");

    Rng rng(config.seed);
    int64_t cloud_points = static_cast<int64_t>(build_cloud(data[0]).points.size());
    DecoderConfig dec = config.dec;
    if (dec.grid_side < 1) dec.grid_side = grid_side_for(cloud_points);
    if (dec.grid_side * dec.grid_side < cloud_points)
        throw ShapeMismatch("pretrain_stream: decoder grid " + std::to_string(dec.grid_side) + "^2 cannot cover a " +
                            std::to_string(cloud_points) + "-point cloud");

    PretrainResult result;
    result.stream.model = make_repaint_model(config.scheme, config.enc, dec, rng.fork("model"));
    result.stream.input_mode = config.input_mode;
    result.stream.mask_ratio = config.mask_ratio;
    if (config.epochs == 0) return result;

    // Inputs and targets are deterministic per sequence; build them once.
    std::vector<PointSet6D> inputs(data.size());
    std::vector<PointSet6D> targets(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        inputs[i] = stream_input(result.stream, data[i]);
        targets[i] = repaint_target(data[i], config.scheme);
    }

    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});
    AdamState adam;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng erng = rng.fork("epoch", static_cast<uint64_t>(epoch));
        erng.shuffle(order);
        double lr = cosine_lr(epoch, config.epochs, config.lr_max, config.lr_min);

        double epoch_loss = 0.0;
        size_t batches = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            std::vector<const PointSet6D*> bi, bt;
            for (size_t i = start; i < end; ++i) {
                bi.push_back(&inputs[order[i]]);
                bt.push_back(&targets[order[i]]);
            }
            BatchGrads g = batch_backward(result.stream.model, bi, bt, config.chamfer_reduce, config.chamfer_grad_mode);
            double inv = 1.0 / static_cast<double>(bi.size());
            for (auto& t : g.total)
                for (double& v : t.data) v *= inv;
            adam_step(result.stream.model.params, g.total, adam, lr, config.adam_beta1, config.adam_beta2,
                      config.adam_eps);
            epoch_loss += g.loss_sum * inv;
            ++batches;
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
    }
    return result;
}

Tensor fuse_features(const std::vector<Tensor>& features) {
    if (features.empty()) throw EmptySet("fuse_features: no streams");
    int64_t total = 0;
    for (const auto& f : features) total += f.numel();
    Tensor out = Tensor::zeros({1, total});
    int64_t at = 0;
    for (const auto& f : features) {
        std::copy(f.data.begin(), f.data.end(), out.data.begin() + at);
        at += f.numel();
    }
    return out;
}

Tensor extract_features(const std::vector<StreamModel>& streams, const SkeletonSequence& seq) {
    std::vector<Tensor> feats;
    feats.reserve(streams.size());
    for (const auto& s : streams) feats.push_back(encode_features(s.model, stream_input(s, seq)));
    return fuse_features(feats);
}

namespace {

Tensor feature_matrix(const std::vector<StreamModel>& streams, const Dataset& data) {
    if (data.empty()) throw EmptySet("feature extraction over empty dataset");
    Tensor first = extract_features(streams, data[0].seq);
    int64_t f = first.numel();
    Tensor x = Tensor::zeros({static_cast<int64_t>(data.size()), f});
    std::copy(first.data.begin(), first.data.end(), x.data.begin());
    parallel_for(data.size() - 1, [&](size_t i) {
        Tensor row = extract_features(streams, data[i + 1].seq);
        std::copy(row.data.begin(), row.data.end(), x.data.begin() + static_cast<int64_t>(i + 1) * f);
    });
    return x;
}

double top1_accuracy(const LinearClassifier& clf, const Tensor& x, const std::vector<int>& y) {
    int64_t n = x.shape[0], f = x.shape[1], c = clf.weight.shape[1];
    int64_t hits = 0;
    for (int64_t i = 0; i < n; ++i) {
        int64_t best = 0;
        double bv = -std::numeric_limits<double>::infinity();
        for (int64_t j = 0; j < c; ++j) {
            double s = clf.bias.data[static_cast<size_t>(j)];
            for (int64_t kk = 0; kk < f; ++kk)
                s += x.data[static_cast<size_t>(i * f + kk)] * clf.weight.data[static_cast<size_t>(kk * c + j)];
            if (s > bv) {
                bv = s;
                best = j;
            }
        }
        if (best == y[static_cast<size_t>(i)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

// Cross-entropy training of the linear layer on fixed feature rows.
struct LinearTrainOut {
    LinearClassifier clf;
    std::vector<double> epoch_loss;
};

LinearTrainOut train_linear(const Tensor& x, const std::vector<int>& y, int class_count,
                            const ClassifierConfig& config) {
    int64_t f = x.shape[1];
    Rng rng(config.seed);
    Rng wrng = rng.fork("classifier");
    LinearTrainOut out;
    out.clf.class_count = class_count;
    double bound = 1.0 / std::sqrt(static_cast<double>(f));
    out.clf.weight = Tensor::zeros({f, class_count});
    for (double& v : out.clf.weight.data) v = wrng.uniform(-bound, bound);
    out.clf.bias = Tensor::zeros({1, class_count});
    for (double& v : out.clf.bias.data) v = wrng.uniform(-bound, bound);

    ParamPack pack;
    pack.items.push_back({"weight", out.clf.weight});
    pack.items.push_back({"bias", out.clf.bias});
    NesterovState state;

    std::vector<size_t> order(static_cast<size_t>(x.shape[0]));
    std::iota(order.begin(), order.end(), size_t{0});
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng erng = rng.fork("epoch", static_cast<uint64_t>(epoch));
        erng.shuffle(order);
        double lr = cosine_lr(epoch, config.epochs, config.lr_max, config.lr_min);
        double epoch_loss = 0.0;
        size_t batches = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            int64_t b = static_cast<int64_t>(end - start);
            Tensor xb = Tensor::zeros({b, f});
            std::vector<int> yb(static_cast<size_t>(b));
            for (int64_t i = 0; i < b; ++i) {
                size_t src = order[start + static_cast<size_t>(i)];
                std::copy_n(x.data.begin() + static_cast<int64_t>(src) * f, f, xb.data.begin() + i * f);
                yb[static_cast<size_t>(i)] = y[src];
            }
            ad::Tape tape;
            ad::Var w = tape.leaf(pack.items[0].value);
            ad::Var bias = tape.leaf(pack.items[1].value);
            ad::Var logits = ad::add_rowwise(ad::matmul(tape.constant(xb), w), bias);
            ad::Var loss = ad::cross_entropy(logits, yb);
            tape.backward(loss);
            std::vector<Tensor> grads = {w.grad(), bias.grad()};
            nesterov_sgd_step(pack, grads, state, lr, config.momentum);
            epoch_loss += loss.value().data[0];
            ++batches;
        }
        out.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
    }
    out.clf.weight = pack.items[0].value;
    out.clf.bias = pack.items[1].value;
    return out;
}

std::vector<int> dataset_labels(const Dataset& data) {
    std::vector<int> y;
    y.reserve(data.size());
    for (const auto& s : data) y.push_back(s.label());
    return y;
}

std::vector<unsigned char> param_bytes(const std::vector<StreamModel>& streams) {
    std::vector<unsigned char> bytes;
    for (const auto& s : streams)
        for (const auto& it : s.model.params.items) {
            const unsigned char* p = reinterpret_cast<const unsigned char*>(it.value.data.data());
            bytes.insert(bytes.end(), p, p + it.value.data.size() * sizeof(double));
        }
    return bytes;
}

}  // namespace

ProbeResult linear_probe(const std::vector<StreamModel>& streams, const Dataset& train, const Dataset& test,
                         const ClassifierConfig& config, int class_count) {
    std::vector<unsigned char> before = param_bytes(streams);

    Tensor xtrain = feature_matrix(streams, train);
    std::vector<int> ytrain = dataset_labels(train);
    LinearTrainOut trained = train_linear(xtrain, ytrain, class_count, config);

    ProbeResult out;
    out.classifier = std::move(trained.clf);
    out.epoch_loss = std::move(trained.epoch_loss);
    out.train_accuracy = top1_accuracy(out.classifier, xtrain, ytrain);
    if (!test.empty()) {
        Tensor xtest = feature_matrix(streams, test);
        std::vector<int> ytest = dataset_labels(test);
        out.test_accuracy = top1_accuracy(out.classifier, xtest, ytest);
    }

    if (param_bytes(streams) != before)
        throw Error("linear_probe mutated frozen encoder parameters");
    return out;
}

FinetuneResult finetune(std::vector<StreamModel> streams, const Dataset& train, const Dataset& test,
                        const std::vector<int>& train_ids, const ClassifierConfig& config, int class_count) {
    if (streams.empty()) throw EmptySet("finetune: no streams");
    std::vector<int> ids = train_ids;
    if (ids.empty()) {
        ids.resize(train.size());
        std::iota(ids.begin(), ids.end(), 0);
    }

    // Encoder inputs are fixed by the stream transforms; cache them per id.
    std::vector<std::vector<PointSet6D>> inputs(streams.size());
    for (size_t s = 0; s < streams.size(); ++s) {
        inputs[s].reserve(ids.size());
        for (int id : ids) inputs[s].push_back(stream_input(streams[s], train[static_cast<size_t>(id)].seq));
    }
    std::vector<int> labels;
    labels.reserve(ids.size());
    for (int id : ids) labels.push_back(train[static_cast<size_t>(id)].label());

    int64_t f_total = 0;
    for (const auto& s : streams) f_total += s.model.enc.feature_dim;
    Rng rng(config.seed);
    Rng wrng = rng.fork("classifier");
    double bound = 1.0 / std::sqrt(static_cast<double>(f_total));
    ParamPack clf;
    Tensor w0 = Tensor::zeros({f_total, class_count});
    for (double& v : w0.data) v = wrng.uniform(-bound, bound);
    Tensor b0 = Tensor::zeros({1, class_count});
    for (double& v : b0.data) v = wrng.uniform(-bound, bound);
    clf.items.push_back({"weight", std::move(w0)});
    clf.items.push_back({"bias", std::move(b0)});

    NesterovState clf_state;
    std::vector<NesterovState> enc_states(streams.size());

    FinetuneResult out;
    std::vector<size_t> order(ids.size());
    std::iota(order.begin(), order.end(), size_t{0});
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng erng = rng.fork("epoch", static_cast<uint64_t>(epoch));
        erng.shuffle(order);
        double lr = cosine_lr(epoch, config.epochs, config.lr_max, config.lr_min);
        double epoch_loss = 0.0;
        size_t batches = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            size_t b = end - start;

            // Per-item tapes; encoder gradients summed in item order.
            std::vector<std::vector<std::vector<Tensor>>> enc_grads(b);  // [item][stream][param]
            std::vector<std::vector<Tensor>> clf_grads(b);               // [item][2]
            std::vector<double> item_loss(b, 0.0);
            parallel_for(b, [&](size_t bi) {
                size_t item = order[start + bi];
                ad::Tape tape;
                std::vector<std::vector<ad::Var>> pvars(streams.size());
                ad::Var fused{};
                for (size_t s = 0; s < streams.size(); ++s) {
                    pvars[s] = bind_params(tape, streams[s].model.params);
                    ad::Var feat = encode(tape, streams[s].model, pvars[s], inputs[s][item]);
                    fused = s == 0 ? feat : ad::concat_cols(fused, feat);
                }
                ad::Var w = tape.leaf(clf.items[0].value);
                ad::Var bias = tape.leaf(clf.items[1].value);
                ad::Var logits = ad::add_rowwise(ad::matmul(fused, w), bias);
                ad::Var loss = ad::cross_entropy(logits, {labels[item]});
                tape.backward(loss);
                item_loss[bi] = loss.value().data[0];
                enc_grads[bi].resize(streams.size());
                for (size_t s = 0; s < streams.size(); ++s)
                    for (const ad::Var& v : pvars[s]) enc_grads[bi][s].push_back(v.grad());
                clf_grads[bi] = {w.grad(), bias.grad()};
            });

            double inv = 1.0 / static_cast<double>(b);
            for (size_t s = 0; s < streams.size(); ++s) {
                std::vector<Tensor> total;
                for (const auto& it : streams[s].model.params.items) total.push_back(Tensor::zeros(it.value.shape));
                for (size_t bi = 0; bi < b; ++bi)
                    for (size_t p = 0; p < total.size(); ++p)
                        for (size_t x = 0; x < total[p].data.size(); ++x)
                            total[p].data[x] += enc_grads[bi][s][p].data[x] * inv;
                nesterov_sgd_step(streams[s].model.params, total, enc_states[s], lr, config.momentum);
            }
            std::vector<Tensor> ctotal = {Tensor::zeros(clf.items[0].value.shape), Tensor::zeros(clf.items[1].value.shape)};
            for (size_t bi = 0; bi < b; ++bi)
                for (size_t p = 0; p < 2; ++p)
                    for (size_t x = 0; x < ctotal[p].data.size(); ++x) ctotal[p].data[x] += clf_grads[bi][p].data[x] * inv;
            nesterov_sgd_step(clf, ctotal, clf_state, lr, config.momentum);

            epoch_loss += pairwise_sum(item_loss.data(), b) * inv;
            ++batches;
        }
        out.epoch_loss.push_back(batches ? epoch_loss / static_cast<double>(batches) : 0.0);
    }

    out.classifier.weight = clf.items[0].value;
    out.classifier.bias = clf.items[1].value;
    out.classifier.class_count = class_count;
    out.streams = std::move(streams);
    if (!test.empty()) {
        Tensor xtest = feature_matrix(out.streams, test);
        std::vector<int> ytest = dataset_labels(test);
        out.test_accuracy = top1_accuracy(out.classifier, xtest, ytest);
    }
    return out;
}

LabeledSubset sample_labeled_subset(const std::vector<int>& labels, int class_count, double fraction, uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw IndexOutOfRange("sample_labeled_subset: fraction must lie in (0, 1]");
    std::vector<std::vector<int>> pools(static_cast<size_t>(class_count));
    for (size_t i = 0; i < labels.size(); ++i) {
        int y = labels[i];
        if (y < 0 || y >= class_count) throw IndexOutOfRange("sample_labeled_subset: label out of range");
        pools[static_cast<size_t>(y)].push_back(static_cast<int>(i));
    }

    Rng rng(seed);
    LabeledSubset out;
    out.fraction = fraction;
    out.seed = seed;
    out.per_class_ids.resize(static_cast<size_t>(class_count));
    for (int c = 0; c < class_count; ++c) {
        auto& pool = pools[static_cast<size_t>(c)];
        if (pool.empty()) throw EmptyClass("sample_labeled_subset: class " + std::to_string(c) + " has no samples");
        Rng crng = rng.fork("class", static_cast<uint64_t>(c));
        crng.shuffle(pool);
        // floor(fraction * pool), nudged so exact products like 0.15 * 100
        // don't land one below their rational value.
        size_t take = static_cast<size_t>(std::floor(fraction * static_cast<double>(pool.size()) + 1e-9));
        take = std::max<size_t>(take, 1);
        take = std::min(take, pool.size());
        out.per_class_ids[static_cast<size_t>(c)].assign(pool.begin(), pool.begin() + static_cast<int64_t>(take));
    }
    return out;
}

std::vector<int> LabeledSubset::flatten() const {
    std::vector<int> out;
    for (const auto& c : per_class_ids) out.insert(out.end(), c.begin(), c.end());
    return out;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "epoch,split,loss,accuracy\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g\n", r.epoch, r.split.c_str(), r.loss, r.accuracy);
        f << buf;
    }
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace skelpaint
