#pragma once

#include <optional>
#include <string>
#include <vector>

#include "skelpaint/errors.hpp"

namespace skelpaint {

// One 3D body joint in camera space (meters). Coordinates are always finite.
struct Joint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

// The J joints of one person in one frame, in the dataset's fixed joint order.
struct PersonFrame {
    std::vector<Joint> joints;
};

// One time step: 1..2 person slots, slot index n in {1,2}.
struct Frame {
    std::vector<PersonFrame> persons;
};

struct SequenceMeta {
    std::optional<int> label;
    std::optional<int> subject;
    std::optional<int> view;
    std::string dataset;
};

// An ordered skeleton sequence. Immutable after construction; all operations
// below return new sequences.
struct SkeletonSequence {
    std::vector<Frame> frames;
    int joint_count = 0;
    SequenceMeta meta;

    int frame_count() const { return static_cast<int>(frames.size()); }
    int person_count() const { return frames.empty() ? 0 : static_cast<int>(frames[0].persons.size()); }
};

struct ManifestEntry {
    std::string path;
    int label = 0;
    int subject = 0;
    int view = 0;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    int class_count = 0;
    int joint_count = 0;
    int max_persons = 1;
};

// Sequence file format (text, UTF-8):
//   SKEL v1 T=<frames> J=<joints> M=<persons>
//   t n j x y z          (T*M*J lines, 1-based indices, t-major then n then j)
SkeletonSequence parse_sequence(const std::string& path);
void write_sequence(const SkeletonSequence& seq, const std::string& path);

// Uniform temporal resampling to exactly T frames. Sequences shorter than T
// are extended by cyclic repetition first.
SkeletonSequence sample_frames(const SkeletonSequence& seq, int T);

// Translates every joint of every person and frame so the first frame's root
// joint of person 1 lands at the origin. Person slots that are all-zero in
// every frame are dropped beforehand.
SkeletonSequence normalize_sequence(const SkeletonSequence& seq, int root_joint = 0);

// Manifest file: one line per sequence, `path<TAB>label<TAB>subject<TAB>view`.
// Relative paths resolve against the manifest's directory. J and M are read
// from the first referenced sequence file; every path must exist.
DatasetManifest load_manifest(const std::string& path);
void write_manifest(const DatasetManifest& manifest, const std::string& path);

}  // namespace skelpaint
