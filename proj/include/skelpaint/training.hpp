#pragma once

#include <functional>
#include <string>
#include <vector>

#include "skelpaint/checkpoint.hpp"
#include "skelpaint/network.hpp"
#include "skelpaint/skeleton_data.hpp"

namespace skelpaint {

// What the encoder sees during repaint pretraining (and at feature-extraction
// time for the same stream): the raw cloud with neutral colors, or the
// scheme-colorized cloud with only a mask_ratio fraction of colors kept.
enum class InputMode { Raw, Hint };

const char* input_mode_name(InputMode m);
InputMode input_mode_from_name(const std::string& name);

struct PretrainConfig {
    ColorScheme scheme = ColorScheme::Temporal;
    int epochs = 150;
    int batch_size = 24;
    double lr_max = 1e-5;
    double lr_min = 1e-7;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    InputMode input_mode = InputMode::Hint;
    double mask_ratio = 0.5;
    ChamferReduce chamfer_reduce = ChamferReduce::Max;
    ChamferGrad chamfer_grad_mode = ChamferGrad::Branch;
    uint64_t seed = 0;
    EncoderConfig enc;
    DecoderConfig dec;  // grid_side 0 derives the smallest grid covering the cloud
};

struct ClassifierConfig {
    double momentum = 0.9;  // Nesterov
    double lr_max = 0.001;
    double lr_min = 1e-5;
    int epochs = 100;
    int batch_size = 32;
    uint64_t seed = 0;
};

// A sequence paired with its class label. The label accessor runs an optional
// probe hook, which the label-isolation test uses to prove that pretraining
// never reads labels.
struct LabeledSample {
    SkeletonSequence seq;
    int label_value = -1;
    std::function<void()> label_probe;

    int label() const {
        if (label_probe) label_probe();
        return label_value;
    }
};

using Dataset = std::vector<LabeledSample>;

// Parse + normalize + resample every manifest entry to T frames.
Dataset load_dataset(const DatasetManifest& manifest, int frames, int root_joint = 0);

// Drops labels entirely; the only path into pretrain_stream.
std::vector<SkeletonSequence> strip_labels(const Dataset& data);

// lr_min + 0.5 (lr_max - lr_min) (1 + cos(pi e / E))
double cosine_lr(int step, int total, double lr_max, double lr_min);

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    int64_t t = 0;
};

// Standard Adam with bias correction, one tensor per parameter.
void adam_step(ParamPack& params, const std::vector<Tensor>& grads, AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

struct NesterovState {
    std::vector<Tensor> velocity;
};

// SGD with Nesterov momentum: v = mu v + g; p -= lr (g + mu v).
void nesterov_sgd_step(ParamPack& params, const std::vector<Tensor>& grads, NesterovState& state, double lr,
                       double momentum = 0.9);

// One colorization stream: the autoencoder plus the input transform it was
// pretrained with.
struct StreamModel {
    RepaintModel model;
    InputMode input_mode = InputMode::Hint;
    double mask_ratio = 0.5;
};

// The 6D cloud this stream's encoder consumes for one sequence.
PointSet6D stream_input(const StreamModel& stream, const SkeletonSequence& seq);
// The fully colorized repaint target for a scheme.
PointSet6D repaint_target(const SkeletonSequence& seq, ColorScheme scheme);

struct PretrainResult {
    StreamModel stream;
    std::vector<double> epoch_loss;  // mean batch loss per epoch
};

// Self-supervised repainting: minimizes the chamfer distance between the
// fully colorized cloud and the repainted prediction. Labels are not part of
// the input type, so none can be read.
PretrainResult pretrain_stream(const std::vector<SkeletonSequence>& data, const PretrainConfig& config);

// Concatenation in fixed stream order.
Tensor fuse_features(const std::vector<Tensor>& features);

struct LinearClassifier {
    Tensor weight;  // (F_total, C)
    Tensor bias;    // (1, C)
    int class_count = 0;
};

// Fused per-sequence feature rows for a set of frozen streams.
Tensor extract_features(const std::vector<StreamModel>& streams, const SkeletonSequence& seq);

struct ProbeResult {
    LinearClassifier classifier;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::vector<double> epoch_loss;
};

// Trains only the linear classifier on frozen encoders (cross-entropy, SGD
// with Nesterov momentum, cosine schedule); encoder bytes are asserted
// unchanged. Accuracy is top-1 on the held-out split.
ProbeResult linear_probe(const std::vector<StreamModel>& streams, const Dataset& train, const Dataset& test,
                         const ClassifierConfig& config, int class_count);

struct FinetuneResult {
    std::vector<StreamModel> streams;
    LinearClassifier classifier;
    double test_accuracy = 0.0;
    std::vector<double> epoch_loss;
};

// Joint training of encoders and classifier with cross-entropy on a labeled
// subset; `train_ids` selects the labeled samples (empty = all).
FinetuneResult finetune(std::vector<StreamModel> streams, const Dataset& train, const Dataset& test,
                        const std::vector<int>& train_ids, const ClassifierConfig& config, int class_count);

struct LabeledSubset {
    std::vector<std::vector<int>> per_class_ids;  // indices into the dataset
    double fraction = 1.0;
    uint64_t seed = 0;

    std::vector<int> flatten() const;
};

// Per class, floor(fraction * pool) ids (minimum one), sampled without
// replacement. Prefixes of one seeded per-class shuffle, so subsets nest
// across fractions for a fixed seed.
LabeledSubset sample_labeled_subset(const std::vector<int>& labels, int class_count, double fraction, uint64_t seed);

struct MetricsRow {
    int epoch = 0;
    std::string split;
    double loss = 0.0;
    double accuracy = 0.0;
};

// CSV with header `epoch,split,loss,accuracy`.
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

}  // namespace skelpaint
