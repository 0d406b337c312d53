#include "skelpaint/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "skelpaint/rng.hpp"

namespace skelpaint {

namespace {
constexpr double kTwoPi = 6.283185307179586476925287;
}

std::vector<MotionFamily> SyntheticSpec::default_families(int class_count, int joint_count) {
    std::vector<MotionFamily> fams;
    std::vector<int> moving;
    for (int j = joint_count / 2; j < joint_count; ++j) moving.push_back(j);
    for (int c = 0; c < class_count; ++c) {
        MotionFamily f;
        f.frequency = 1.0 + static_cast<double>(c);
        f.amplitude = 0.15;
        f.phase = kTwoPi * static_cast<double>(c) / static_cast<double>(class_count);
        f.moving_joints = moving;
        fams.push_back(std::move(f));
    }
    return fams;
}

std::vector<MotionFamily> SyntheticSpec::disjoint_families(int class_count, int joint_count) {
    std::vector<MotionFamily> fams;
    for (int c = 0; c < class_count; ++c) {
        MotionFamily f;
        f.frequency = 1.0;
        f.amplitude = 0.2;
        f.phase = 0.0;
        for (int j = c; j < joint_count; j += class_count) f.moving_joints.push_back(j);
        fams.push_back(std::move(f));
    }
    return fams;
}

namespace {

void validate_spec(const SyntheticSpec& spec, const std::vector<MotionFamily>& fams) {
    if (spec.class_count < 2) throw IndexOutOfRange("synthetic spec needs at least 2 classes");
    if (spec.noise_sigma < 0.0) throw IndexOutOfRange("synthetic spec: negative noise sigma");
    if (spec.persons < 1 || spec.persons > 2) throw IndexOutOfRange("synthetic spec: persons must be 1 or 2");
    if (static_cast<int>(fams.size()) != spec.class_count)
        throw ShapeMismatch("synthetic spec: family count must equal class count");
    for (size_t a = 0; a < fams.size(); ++a) {
        for (int j : fams[a].moving_joints)
            if (j < 0 || j >= spec.joint_count) throw IndexOutOfRange("synthetic spec: moving joint out of range");
        for (size_t b = a + 1; b < fams.size(); ++b)
            if (fams[a] == fams[b]) throw ShapeMismatch("synthetic spec: classes must have distinct motion families");
    }
}

SkeletonSequence make_sequence(const SyntheticSpec& spec, const MotionFamily& fam, double seq_phase, Rng noise) {
    SkeletonSequence seq;
    seq.joint_count = spec.joint_count;
    seq.frames.resize(static_cast<size_t>(spec.frame_count));
    for (int t = 0; t < spec.frame_count; ++t) {
        Frame& frame = seq.frames[static_cast<size_t>(t)];
        frame.persons.resize(static_cast<size_t>(spec.persons));
        for (int n = 0; n < spec.persons; ++n) {
            auto& joints = frame.persons[static_cast<size_t>(n)].joints;
            joints.resize(static_cast<size_t>(spec.joint_count));
            // Person 2 stands 1 m to the side and moves in anti-phase.
            double x0 = n == 1 ? 1.0 : 0.0;
            double phase = seq_phase + (n == 1 ? 3.14159265358979323846 : 0.0);
            for (int j = 0; j < spec.joint_count; ++j) {
                double y = spec.limb_length * static_cast<double>(j);
                double x = x0;
                bool moves = std::find(fam.moving_joints.begin(), fam.moving_joints.end(), j) != fam.moving_joints.end();
                if (moves)
                    x += fam.amplitude *
                         std::sin(kTwoPi * fam.frequency * static_cast<double>(t) / static_cast<double>(spec.frame_count) +
                                  fam.phase + phase);
                double z = 0.0;
                if (spec.noise_sigma > 0.0) {
                    x += spec.noise_sigma * noise.normal();
                    y += spec.noise_sigma * noise.normal();
                    z += spec.noise_sigma * noise.normal();
                }
                joints[static_cast<size_t>(j)] = Joint{x, y, z};
            }
        }
    }
    return seq;
}

}  // namespace

DatasetManifest generate_dataset(const SyntheticSpec& spec, const std::string& out_dir) {
    std::vector<MotionFamily> fams =
        spec.families.empty() ? SyntheticSpec::default_families(spec.class_count, spec.joint_count) : spec.families;
    validate_spec(spec, fams);

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());

    Rng rng(spec.seed);
    DatasetManifest manifest;
    manifest.class_count = spec.class_count;
    manifest.joint_count = spec.joint_count;
    manifest.max_persons = spec.persons;
    for (int c = 0; c < spec.class_count; ++c) {
        for (int s = 0; s < spec.sequences_per_class; ++s) {
            Rng srng = rng.fork("seq", static_cast<uint64_t>(c) * 1000003ull + static_cast<uint64_t>(s));
            double seq_phase = spec.phase_jitter * srng.fork("phase").uniform();
            SkeletonSequence seq = make_sequence(spec, fams[static_cast<size_t>(c)], seq_phase, srng.fork("noise"));

            char name[64];
            std::snprintf(name, sizeof name, "seq_c%03d_s%04d.skl", c, s);
            std::string path = (std::filesystem::path(out_dir) / name).string();
            write_sequence(seq, path);
            manifest.entries.push_back(ManifestEntry{path, c, s, 0});
        }
    }
    write_manifest(manifest, (std::filesystem::path(out_dir) / "manifest.tsv").string());
    return manifest;
}

SplitManifests split_manifest(const DatasetManifest& manifest, double test_fraction) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0))
        throw IndexOutOfRange("split_manifest: test fraction must lie in [0, 1)");
    std::vector<std::vector<size_t>> per_class(static_cast<size_t>(manifest.class_count));
    for (size_t i = 0; i < manifest.entries.size(); ++i)
        per_class[static_cast<size_t>(manifest.entries[i].label)].push_back(i);

    SplitManifests out;
    out.train.class_count = out.test.class_count = manifest.class_count;
    out.train.joint_count = out.test.joint_count = manifest.joint_count;
    out.train.max_persons = out.test.max_persons = manifest.max_persons;
    for (const auto& ids : per_class) {
        size_t n_test = static_cast<size_t>(std::ceil(test_fraction * static_cast<double>(ids.size())));
        n_test = std::min(n_test, ids.size());
        size_t n_train = ids.size() - n_test;
        for (size_t i = 0; i < ids.size(); ++i)
            (i < n_train ? out.train : out.test).entries.push_back(manifest.entries[ids[i]]);
    }
    return out;
}

Metrics evaluate(const std::vector<StreamModel>& streams, const LinearClassifier& classifier, const Dataset& test) {
    if (test.empty()) throw EmptySet("evaluate: empty test set");
    int c = classifier.class_count;
    Metrics m;
    m.class_count = c;
    m.sample_count = static_cast<int64_t>(test.size());
    m.confusion.assign(static_cast<size_t>(c) * static_cast<size_t>(c), 0);

    int64_t f = classifier.weight.shape[0];
    int64_t hits = 0;
    for (const auto& sample : test) {
        Tensor feat = extract_features(streams, sample.seq);
        if (feat.numel() != f) throw ShapeMismatch("evaluate: feature width does not match the classifier");
        int best = 0;
        double bv = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < c; ++j) {
            double s = classifier.bias.data[static_cast<size_t>(j)];
            for (int64_t kk = 0; kk < f; ++kk)
                s += feat.data[static_cast<size_t>(kk)] * classifier.weight.data[static_cast<size_t>(kk * c + j)];
            if (s > bv) {
                bv = s;
                best = j;
            }
        }
        int truth = sample.label();
        if (truth < 0 || truth >= c) throw IndexOutOfRange("evaluate: label out of classifier range");
        m.confusion[static_cast<size_t>(truth) * static_cast<size_t>(c) + static_cast<size_t>(best)] += 1;
        if (best == truth) ++hits;
    }
    m.accuracy = static_cast<double>(hits) / static_cast<double>(m.sample_count);
    m.per_class_accuracy.assign(static_cast<size_t>(c), 0.0);
    for (int t = 0; t < c; ++t) {
        int64_t row = 0;
        for (int p = 0; p < c; ++p) row += m.confusion_at(t, p);
        m.per_class_accuracy[static_cast<size_t>(t)] =
            row == 0 ? 0.0 : static_cast<double>(m.confusion_at(t, t)) / static_cast<double>(row);
    }
    return m;
}

void write_metrics_summary_csv(const Metrics& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "class,accuracy,samples\n";
    char buf[96];
    for (int c = 0; c < m.class_count; ++c) {
        int64_t row = 0;
        for (int p = 0; p < m.class_count; ++p) row += m.confusion_at(c, p);
        std::snprintf(buf, sizeof buf, "%d,%.17g,%lld\n", c, m.per_class_accuracy[static_cast<size_t>(c)],
                      static_cast<long long>(row));
        f << buf;
    }
    std::snprintf(buf, sizeof buf, "all,%.17g,%lld\n", m.accuracy, static_cast<long long>(m.sample_count));
    f << buf;
    if (!f) throw IoError("write failed: " + path);
}

std::string metrics_summary_table(const Metrics& m) {
    std::ostringstream out;
    char buf[96];
    std::snprintf(buf, sizeof buf, "top-1 accuracy: %.4f (%lld samples)\n", m.accuracy,
                  static_cast<long long>(m.sample_count));
    out << buf;
    out << "class  accuracy  confusion row\n";
    for (int t = 0; t < m.class_count; ++t) {
        std::snprintf(buf, sizeof buf, "%5d  %8.4f  ", t, m.per_class_accuracy[static_cast<size_t>(t)]);
        out << buf;
        for (int p = 0; p < m.class_count; ++p) out << m.confusion_at(t, p) << (p + 1 < m.class_count ? " " : "\n");
    }
    return out.str();
}

}  // namespace skelpaint
