#pragma once

#include <string>
#include <vector>

#include "skelpaint/skeleton_data.hpp"
#include "skelpaint/training.hpp"

namespace skelpaint {

// One class's motion: selected joints of a stick-figure chain oscillate
// sinusoidally around the base pose.
struct MotionFamily {
    double frequency = 1.0;  // cycles over the whole sequence
    double amplitude = 0.15;  // meters
    double phase = 0.0;       // radians
    std::vector<int> moving_joints;  // 0-based joint indices

    bool operator==(const MotionFamily&) const = default;
};

struct SyntheticSpec {
    int class_count = 5;
    int sequences_per_class = 40;
    int joint_count = 8;
    int frame_count = 16;  // frames written per file
    int persons = 1;
    double noise_sigma = 0.01;   // meters
    double limb_length = 0.25;   // meters
    double phase_jitter = 0.5;   // radians, per-sequence phase offset
    uint64_t seed = 0;
    std::vector<MotionFamily> families;  // one per class; filled by default_families() if empty

    // Families that differ only in temporal structure (frequency + phase,
    // same moving joints and amplitude): the point-position occupancy is
    // nearly class-invariant, so temporal order carries the class signal.
    static std::vector<MotionFamily> default_families(int class_count, int joint_count);
    // Families with disjoint moving-joint subsets: linearly separable from
    // raw coordinates, for oracle and supervised sanity runs.
    static std::vector<MotionFamily> disjoint_families(int class_count, int joint_count);
};

// Writes one sequence file per sample into out_dir plus `manifest.tsv`, and
// returns the manifest. Bit-reproducible given (spec, spec.seed).
DatasetManifest generate_dataset(const SyntheticSpec& spec, const std::string& out_dir);

// Splits per class: the last ceil(test_fraction * count) sequences of each
// class (by manifest order) become the test set. Disjoint by construction.
struct SplitManifests {
    DatasetManifest train;
    DatasetManifest test;
};
SplitManifests split_manifest(const DatasetManifest& manifest, double test_fraction);

struct Metrics {
    double accuracy = 0.0;
    std::vector<double> per_class_accuracy;
    std::vector<int64_t> confusion;  // row-major C x C, row = true class
    int64_t sample_count = 0;
    int class_count = 0;

    int64_t confusion_at(int truth, int pred) const {
        return confusion[static_cast<size_t>(truth) * static_cast<size_t>(class_count) + static_cast<size_t>(pred)];
    }
};

// Deterministic forward pass per sequence, argmax prediction, aggregated
// top-1 / per-class accuracy and confusion counts.
Metrics evaluate(const std::vector<StreamModel>& streams, const LinearClassifier& classifier, const Dataset& test);

void write_metrics_summary_csv(const Metrics& m, const std::string& path);
std::string metrics_summary_table(const Metrics& m);

}  // namespace skelpaint
