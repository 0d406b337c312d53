#include "skelpaint/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "skelpaint/chamfer.hpp"
#include "skelpaint/checkpoint.hpp"
#include "skelpaint/colorize.hpp"
#include "skelpaint/errors.hpp"
#include "skelpaint/evalbench.hpp"
#include "skelpaint/parallel.hpp"
#include "skelpaint/training.hpp"

namespace skelpaint {

namespace {

void log_kv(const std::string& key, const std::string& value) {
    std::cerr << "[config] " << key << " = " << value << "\n";
}

void log_kv(const std::string& key, double value) {
    std::ostringstream s;
    s.precision(17);
    s << value;
    log_kv(key, s.str());
}

void log_kv(const std::string& key, int64_t value) { log_kv(key, std::to_string(value)); }

std::vector<int64_t> parse_widths(const std::string& csv) {
    std::vector<int64_t> out;
    std::istringstream in(csv);
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(std::stoll(tok));
    if (out.empty()) throw IndexOutOfRange("block widths list is empty");
    return out;
}

// `key = value` run-config files. Keys are the long flag names without
// dashes; explicit flags win over config entries, which win over defaults.
void apply_config_file(CLI::App* cmd, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    auto trim = [](const std::string& s) {
        size_t a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        size_t b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    };
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::string entry = trim(line);
        if (entry.empty()) continue;
        size_t eq = entry.find('=');
        if (eq == std::string::npos)
            throw IndexOutOfRange(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
        std::string key = trim(entry.substr(0, eq));
        std::string value = trim(entry.substr(eq + 1));
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (opt == nullptr)
            throw IndexOutOfRange(path + ":" + std::to_string(line_no) + ": unknown config key '" + key + "'");
        if (opt->count() > 0) continue;  // set on the command line
        opt->add_result(value);
        opt->run_callback();
    }
}

struct ArchFlags {
    int64_t k = 6;
    std::string block_widths = "16,16,32";
    int64_t feature_dim = 128;
    int64_t grid_side = 0;  // 0 = derive from cloud size
    int64_t hidden_width = 64;

    void attach(CLI::App* cmd) {
        cmd->add_option("--k", k, "encoder k-NN neighbor count");
        cmd->add_option("--block-widths", block_widths, "edge-conv block widths, comma separated");
        cmd->add_option("--feature-dim", feature_dim, "encoder output feature dimension");
        cmd->add_option("--grid-side", grid_side, "decoder grid side G (0 = smallest covering the cloud)");
        cmd->add_option("--hidden-width", hidden_width, "folding MLP hidden width");
    }

    EncoderConfig encoder() const {
        EncoderConfig e;
        e.k = k;
        e.block_widths = parse_widths(block_widths);
        e.feature_dim = feature_dim;
        return e;
    }

    DecoderConfig decoder() const {
        DecoderConfig d;
        d.grid_side = grid_side;
        d.hidden_width = hidden_width;
        return d;
    }
};

SkeletonSequence load_one_sequence(const std::string& path, int frames, bool normalize) {
    SkeletonSequence seq = parse_sequence(path);
    if (normalize) seq = normalize_sequence(seq);
    if (frames > 0) seq = sample_frames(seq, frames);
    return seq;
}

StreamModel load_stream(const std::string& path) {
    LoadedModel loaded = load_model(path);
    StreamModel s;
    s.model = std::move(loaded.model);
    auto mode = loaded.extra.find("input_mode");
    if (mode != loaded.extra.end()) s.input_mode = input_mode_from_name(mode->second);
    auto ratio = loaded.extra.find("mask_ratio");
    if (ratio != loaded.extra.end()) s.mask_ratio = std::stod(ratio->second);
    return s;
}

void save_classifier(const std::string& path, const LinearClassifier& clf) {
    ParamPack pack;
    pack.items.push_back({"weight", clf.weight});
    pack.items.push_back({"bias", clf.bias});
    std::map<std::string, std::string> header;
    header["format"] = "linear-classifier";
    header["classes"] = std::to_string(clf.class_count);
    save_params(path, pack, header);
}

LinearClassifier load_classifier(const std::string& path) {
    LoadedParams raw = load_params(path);
    auto fmt = raw.header.find("format");
    if (fmt == raw.header.end() || fmt->second != "linear-classifier")
        throw MalformedFile(path + ": not a classifier checkpoint");
    LinearClassifier clf;
    clf.class_count = static_cast<int>(std::stoll(raw.header.at("classes")));
    clf.weight = raw.pack.find("weight");
    clf.bias = raw.pack.find("bias");
    return clf;
}

// Random never-pretrained stream, the control arm of the baselines.
StreamModel random_stream(ColorScheme scheme, const ArchFlags& arch, const std::string& input_mode, double mask_ratio,
                          uint64_t seed, int64_t cloud_points) {
    DecoderConfig dec = arch.decoder();
    if (dec.grid_side < 1) dec.grid_side = grid_side_for(cloud_points);
    StreamModel s;
    s.model = make_repaint_model(scheme, arch.encoder(), dec, Rng(seed).fork("model"));
    s.input_mode = input_mode_from_name(input_mode);
    s.mask_ratio = mask_ratio;
    return s;
}

int64_t cloud_points_of(const Dataset& data) {
    if (data.empty()) throw EmptySet("empty dataset");
    return static_cast<int64_t>(build_cloud(data[0].seq).points.size());
}

std::vector<MetricsRow> loss_rows(const std::vector<double>& losses, const std::string& split) {
    std::vector<MetricsRow> rows;
    for (size_t e = 0; e < losses.size(); ++e)
        rows.push_back(MetricsRow{static_cast<int>(e), split, losses[e], std::nan("")});
    return rows;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"skelpaint: skeleton-cloud colorization, repainting and evaluation"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "cap on worker threads (0 = hardware)")
        ->envname("SKELPAINT_THREADS");

    // gen-data ---------------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic skeleton-action dataset");
    SyntheticSpec spec;
    std::string gen_out = "data";
    std::string family_mode = "temporal";
    double test_fraction = 0.2;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--classes", spec.class_count, "number of classes");
    gen->add_option("--per-class", spec.sequences_per_class, "sequences per class");
    gen->add_option("--joints", spec.joint_count, "joints per skeleton");
    gen->add_option("--frames", spec.frame_count, "frames per sequence");
    gen->add_option("--persons", spec.persons, "persons per sequence (1 or 2)");
    gen->add_option("--sigma", spec.noise_sigma, "positional noise sigma in meters");
    gen->add_option("--phase-jitter", spec.phase_jitter, "per-sequence phase jitter in radians");
    gen->add_option("--seed", spec.seed, "generation seed");
    gen->add_option("--family-mode", family_mode, "motion family layout: temporal | disjoint")
        ->check(CLI::IsMember({"temporal", "disjoint"}));
    gen->add_option("--test-fraction", test_fraction, "per-class fraction held out into test.tsv");

    // colorize ---------------------------------------------------------------
    auto* col = app.add_subcommand("colorize", "colorize one sequence and export an ASCII PLY");
    std::string col_in, col_out = "cloud.ply", col_scheme = "temporal";
    double col_mask = 1.0;
    int col_frames = 0;
    bool col_normalize = false;
    col->add_option("--in", col_in, "input sequence file")->required();
    col->add_option("--out", col_out, "output PLY path");
    col->add_option("--scheme", col_scheme, "colorization scheme: temporal | spatial | person")
        ->check(CLI::IsMember({"temporal", "spatial", "person"}));
    col->add_option("--mask", col_mask, "colorization ratio in [0,1] (1 = all points colored)");
    col->add_option("--frames", col_frames, "resample to this many frames first (0 = keep all)");
    col->add_flag("--normalize", col_normalize, "root-joint normalize before stacking");

    // pretrain ---------------------------------------------------------------
    auto* pre = app.add_subcommand("pretrain", "self-supervised repainting pretraining for one stream");
    std::string pre_config;
    pre->add_option("--config", pre_config, "key = value config file (flags override)");
    std::string pre_data, pre_scheme = "temporal", pre_out = "model.ckpt", pre_metrics, pre_input_mode = "hint";
    std::string pre_reduce = "max", pre_grad = "branch";
    PretrainConfig pc;
    int pre_frames = 40;
    ArchFlags pre_arch;
    pre->add_option("--data", pre_data, "training manifest")->required();
    pre->add_option("--scheme", pre_scheme, "colorization stream: temporal | spatial | person")
        ->check(CLI::IsMember({"temporal", "spatial", "person"}));
    pre->add_option("--out", pre_out, "output model checkpoint");
    pre->add_option("--metrics", pre_metrics, "per-epoch loss CSV");
    pre->add_option("--frames", pre_frames, "frames sampled per sequence");
    pre->add_option("--epochs", pc.epochs, "training epochs");
    pre->add_option("--batch-size", pc.batch_size, "batch size");
    pre->add_option("--lr-max", pc.lr_max, "initial learning rate");
    pre->add_option("--lr-min", pc.lr_min, "final learning rate (cosine annealing)");
    pre->add_option("--adam-beta1", pc.adam_beta1, "Adam first-moment decay");
    pre->add_option("--adam-beta2", pc.adam_beta2, "Adam second-moment decay");
    pre->add_option("--adam-eps", pc.adam_eps, "Adam denominator epsilon");
    pre->add_option("--input-mode", pre_input_mode, "encoder input: raw | hint")
        ->check(CLI::IsMember({"raw", "hint"}));
    pre->add_option("--mask-ratio", pc.mask_ratio, "colorization ratio for hint input");
    pre->add_option("--chamfer-reduce", pre_reduce, "chamfer reduction: max | sum")
        ->check(CLI::IsMember({"max", "sum"}));
    pre->add_option("--chamfer-grad", pre_grad, "max-branch gradient: branch | smooth")
        ->check(CLI::IsMember({"branch", "smooth"}));
    pre->add_option("--seed", pc.seed, "training seed");
    pre_arch.attach(pre);

    // probe ------------------------------------------------------------------
    auto* probe = app.add_subcommand("probe", "linear probe on frozen encoders (unsupervised protocol)");
    std::string probe_config;
    probe->add_option("--config", probe_config, "key = value config file (flags override)");
    std::string probe_train, probe_test, probe_clf_out, probe_metrics, probe_scheme = "temporal";
    std::string probe_input_mode = "raw";
    double probe_mask_ratio = 0.5;
    std::vector<std::string> probe_ckpts;
    bool probe_random = false;
    ClassifierConfig probe_cc;
    int probe_frames = 40;
    ArchFlags probe_arch;
    probe->add_option("--data", probe_train, "training manifest")->required();
    probe->add_option("--test", probe_test, "held-out test manifest")->required();
    probe->add_option("--ckpt", probe_ckpts, "pretrained stream checkpoint(s), fused in the given order");
    probe->add_flag("--random-init", probe_random, "use a random frozen encoder instead of checkpoints");
    probe->add_option("--scheme", probe_scheme, "stream tag for --random-init")
        ->check(CLI::IsMember({"temporal", "spatial", "person"}));
    probe->add_option("--input-mode", probe_input_mode, "encoder input for --random-init: raw | hint")
        ->check(CLI::IsMember({"raw", "hint"}));
    probe->add_option("--mask-ratio", probe_mask_ratio, "colorization ratio for --random-init hint input");
    probe->add_option("--frames", probe_frames, "frames sampled per sequence");
    probe->add_option("--epochs", probe_cc.epochs, "classifier epochs");
    probe->add_option("--batch-size", probe_cc.batch_size, "classifier batch size");
    probe->add_option("--lr-max", probe_cc.lr_max, "initial learning rate");
    probe->add_option("--lr-min", probe_cc.lr_min, "final learning rate");
    probe->add_option("--momentum", probe_cc.momentum, "Nesterov momentum");
    probe->add_option("--seed", probe_cc.seed, "classifier seed");
    probe->add_option("--classifier-out", probe_clf_out, "save trained classifier checkpoint here");
    probe->add_option("--metrics", probe_metrics, "per-epoch loss CSV");
    probe_arch.attach(probe);

    // finetune ---------------------------------------------------------------
    auto* fine = app.add_subcommand("finetune", "joint fine-tuning (semi-supervised / supervised protocols)");
    std::string fine_config;
    fine->add_option("--config", fine_config, "key = value config file (flags override)");
    std::string fine_train, fine_test, fine_out_dir, fine_metrics, fine_scheme = "temporal";
    std::string fine_input_mode = "raw";
    double fine_mask_ratio = 0.5;
    std::vector<std::string> fine_ckpts;
    bool fine_random = false;
    ClassifierConfig fine_cc;
    double fine_fraction = 1.0;
    uint64_t fine_subset_seed = 0;
    int fine_frames = 40;
    ArchFlags fine_arch;
    fine->add_option("--data", fine_train, "training manifest")->required();
    fine->add_option("--test", fine_test, "held-out test manifest")->required();
    fine->add_option("--ckpt", fine_ckpts, "pretrained stream checkpoint(s)");
    fine->add_flag("--random-init", fine_random, "start from random encoders (baseline)");
    fine->add_option("--scheme", fine_scheme, "stream tag for --random-init")
        ->check(CLI::IsMember({"temporal", "spatial", "person"}));
    fine->add_option("--input-mode", fine_input_mode, "encoder input for --random-init: raw | hint")
        ->check(CLI::IsMember({"raw", "hint"}));
    fine->add_option("--mask-ratio", fine_mask_ratio, "colorization ratio for --random-init hint input");
    fine->add_option("--fraction", fine_fraction, "labeled fraction per class in (0,1]; 1 = supervised");
    fine->add_option("--subset-seed", fine_subset_seed, "seed for the labeled-subset sampler");
    fine->add_option("--frames", fine_frames, "frames sampled per sequence");
    fine->add_option("--epochs", fine_cc.epochs, "fine-tuning epochs");
    fine->add_option("--batch-size", fine_cc.batch_size, "batch size");
    fine->add_option("--lr-max", fine_cc.lr_max, "initial learning rate");
    fine->add_option("--lr-min", fine_cc.lr_min, "final learning rate");
    fine->add_option("--momentum", fine_cc.momentum, "Nesterov momentum");
    fine->add_option("--seed", fine_cc.seed, "training seed");
    fine->add_option("--out-dir", fine_out_dir, "directory for updated model + classifier checkpoints");
    fine->add_option("--metrics", fine_metrics, "per-epoch loss CSV");
    fine_arch.attach(fine);

    // eval -------------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "evaluate saved models + classifier on a test manifest");
    std::string ev_test, ev_clf, ev_metrics;
    std::vector<std::string> ev_ckpts;
    int ev_frames = 40;
    ev->add_option("--data", ev_test, "test manifest")->required();
    ev->add_option("--ckpt", ev_ckpts, "stream checkpoint(s), same order as training")->required();
    ev->add_option("--classifier", ev_clf, "classifier checkpoint")->required();
    ev->add_option("--frames", ev_frames, "frames sampled per sequence");
    ev->add_option("--metrics", ev_metrics, "per-class accuracy CSV");

    // export-ply -------------------------------------------------------------
    auto* exp = app.add_subcommand("export-ply", "repaint one sequence with a trained model and export PLY");
    std::string exp_in, exp_ckpt, exp_out = "repaint.ply";
    int exp_frames = 40;
    exp->add_option("--in", exp_in, "input sequence file")->required();
    exp->add_option("--ckpt", exp_ckpt, "repaint model checkpoint")->required();
    exp->add_option("--out", exp_out, "output PLY path");
    exp->add_option("--frames", exp_frames, "frames sampled per sequence");

    // bench-chamfer ----------------------------------------------------------
    auto* bench = app.add_subcommand("bench-chamfer", "benchmark brute-force vs indexed chamfer distance");
    std::string bench_sizes = "64,128,256,512,1024,2000";
    uint64_t bench_seed = 0;
    int bench_reps = 3;
    bench->add_option("--sizes", bench_sizes, "cloud sizes, comma separated");
    bench->add_option("--seed", bench_seed, "point generation seed");
    bench->add_option("--reps", bench_reps, "repetitions per size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // prints help or the parse error; normalize failures to exit code 1
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        set_max_threads(threads);
        log_kv("threads", static_cast<int64_t>(max_threads()));

        if (*gen) {
            if (family_mode == "disjoint") spec.families = SyntheticSpec::disjoint_families(spec.class_count, spec.joint_count);
            log_kv("seed", static_cast<int64_t>(spec.seed));
            log_kv("classes", static_cast<int64_t>(spec.class_count));
            log_kv("per_class", static_cast<int64_t>(spec.sequences_per_class));
            log_kv("family_mode", family_mode);
            DatasetManifest manifest = generate_dataset(spec, gen_out);
            SplitManifests split = split_manifest(manifest, test_fraction);
            std::string train_path = (std::filesystem::path(gen_out) / "train.tsv").string();
            std::string test_path = (std::filesystem::path(gen_out) / "test.tsv").string();
            write_manifest(split.train, train_path);
            write_manifest(split.test, test_path);
            std::cout << "wrote " << manifest.entries.size() << " sequences to " << gen_out << "\n"
                      << "train manifest: " << train_path << " (" << split.train.entries.size() << ")\n"
                      << "test manifest:  " << test_path << " (" << split.test.entries.size() << ")\n";
            return 0;
        }

        if (*col) {
            log_kv("scheme", col_scheme);
            log_kv("mask", col_mask);
            SkeletonSequence seq = load_one_sequence(col_in, col_frames, col_normalize);
            ColorizedCloud cloud = colorize_cloud(build_cloud(seq), scheme_from_name(col_scheme));
            cloud = apply_color_mask(cloud, col_mask);
            export_ply(cloud, col_out);
            std::cout << "wrote " << cloud.points.size() << " points to " << col_out << "\n";
            return 0;
        }

        if (*pre) {
            if (!pre_config.empty()) apply_config_file(pre, pre_config);
            pc.scheme = scheme_from_name(pre_scheme);
            pc.input_mode = input_mode_from_name(pre_input_mode);
            pc.chamfer_reduce = pre_reduce == "sum" ? ChamferReduce::Sum : ChamferReduce::Max;
            pc.chamfer_grad_mode = pre_grad == "smooth" ? ChamferGrad::Smooth : ChamferGrad::Branch;
            pc.enc = pre_arch.encoder();
            pc.dec = pre_arch.decoder();
            log_kv("seed", static_cast<int64_t>(pc.seed));
            log_kv("scheme", pre_scheme);
            log_kv("epochs", static_cast<int64_t>(pc.epochs));
            log_kv("batch_size", static_cast<int64_t>(pc.batch_size));
            log_kv("lr_max", pc.lr_max);
            log_kv("lr_min", pc.lr_min);
            log_kv("input_mode", pre_input_mode);
            log_kv("mask_ratio", pc.mask_ratio);
            log_kv("frames", static_cast<int64_t>(pre_frames));

            Dataset data = load_dataset(load_manifest(pre_data), pre_frames);
            PretrainResult result = pretrain_stream(strip_labels(data), pc);
            std::map<std::string, std::string> extra;
            extra["input_mode"] = input_mode_name(result.stream.input_mode);
            std::ostringstream ratio;
            ratio.precision(17);
            ratio << result.stream.mask_ratio;
            extra["mask_ratio"] = ratio.str();
            extra["seed"] = std::to_string(pc.seed);
            save_model(pre_out, result.stream.model, extra);
            if (!pre_metrics.empty()) write_metrics_csv(pre_metrics, loss_rows(result.epoch_loss, "pretrain"));
            if (!result.epoch_loss.empty())
                std::cout << "final epoch loss: " << result.epoch_loss.back() << "\n";
            std::cout << "saved model to " << pre_out << "\n";
            return 0;
        }

        if (*probe || *fine) {
            bool is_probe = static_cast<bool>(*probe);
            if (is_probe && !probe_config.empty()) apply_config_file(probe, probe_config);
            if (!is_probe && !fine_config.empty()) apply_config_file(fine, fine_config);
            const std::string& train_path = is_probe ? probe_train : fine_train;
            const std::string& test_path = is_probe ? probe_test : fine_test;
            const std::vector<std::string>& ckpts = is_probe ? probe_ckpts : fine_ckpts;
            bool random_init = is_probe ? probe_random : fine_random;
            int frames = is_probe ? probe_frames : fine_frames;
            ClassifierConfig cc = is_probe ? probe_cc : fine_cc;

            if (ckpts.empty() == !random_init)
                throw IndexOutOfRange("provide either --ckpt checkpoints or --random-init, not both/neither");

            DatasetManifest train_manifest = load_manifest(train_path);
            Dataset train = load_dataset(train_manifest, frames);
            Dataset test = load_dataset(load_manifest(test_path), frames);
            int classes = train_manifest.class_count;

            std::vector<StreamModel> streams;
            if (random_init) {
                const ArchFlags& arch = is_probe ? probe_arch : fine_arch;
                streams.push_back(random_stream(scheme_from_name(is_probe ? probe_scheme : fine_scheme), arch,
                                                is_probe ? probe_input_mode : fine_input_mode,
                                                is_probe ? probe_mask_ratio : fine_mask_ratio, cc.seed,
                                                cloud_points_of(train)));
            } else {
                for (const auto& p : ckpts) streams.push_back(load_stream(p));
            }
            log_kv("seed", static_cast<int64_t>(cc.seed));
            log_kv("streams", static_cast<int64_t>(streams.size()));
            log_kv("classes", static_cast<int64_t>(classes));
            log_kv("epochs", static_cast<int64_t>(cc.epochs));

            if (is_probe) {
                ProbeResult result = linear_probe(streams, train, test, cc, classes);
                std::cout << "train accuracy: " << result.train_accuracy << "\n"
                          << "test accuracy:  " << result.test_accuracy << "\n";
                if (!probe_clf_out.empty()) save_classifier(probe_clf_out, result.classifier);
                if (!probe_metrics.empty()) {
                    auto rows = loss_rows(result.epoch_loss, "probe");
                    rows.push_back(MetricsRow{cc.epochs, "test", std::nan(""), result.test_accuracy});
                    write_metrics_csv(probe_metrics, rows);
                }
            } else {
                log_kv("fraction", fine_fraction);
                std::vector<int> labels;
                labels.reserve(train.size());
                for (const auto& s : train) labels.push_back(s.label());
                LabeledSubset subset = sample_labeled_subset(labels, classes, fine_fraction, fine_subset_seed);
                FinetuneResult result = finetune(std::move(streams), train, test, subset.flatten(), cc, classes);
                std::cout << "labeled samples: " << subset.flatten().size() << "\n"
                          << "test accuracy:  " << result.test_accuracy << "\n";
                if (!fine_out_dir.empty()) {
                    std::filesystem::create_directories(fine_out_dir);
                    for (size_t s = 0; s < result.streams.size(); ++s) {
                        std::map<std::string, std::string> extra;
                        extra["input_mode"] = input_mode_name(result.streams[s].input_mode);
                        std::ostringstream ratio;
                        ratio.precision(17);
                        ratio << result.streams[s].mask_ratio;
                        extra["mask_ratio"] = ratio.str();
                        save_model((std::filesystem::path(fine_out_dir) / ("stream" + std::to_string(s) + ".ckpt")).string(),
                                   result.streams[s].model, extra);
                    }
                    save_classifier((std::filesystem::path(fine_out_dir) / "classifier.ckpt").string(), result.classifier);
                }
                if (!fine_metrics.empty()) {
                    auto rows = loss_rows(result.epoch_loss, "finetune");
                    rows.push_back(MetricsRow{cc.epochs, "test", std::nan(""), result.test_accuracy});
                    write_metrics_csv(fine_metrics, rows);
                }
            }
            return 0;
        }

        if (*ev) {
            std::vector<StreamModel> streams;
            for (const auto& p : ev_ckpts) streams.push_back(load_stream(p));
            LinearClassifier clf = load_classifier(ev_clf);
            Dataset test = load_dataset(load_manifest(ev_test), ev_frames);
            Metrics m = evaluate(streams, clf, test);
            std::cout << metrics_summary_table(m);
            if (!ev_metrics.empty()) write_metrics_summary_csv(m, ev_metrics);
            return 0;
        }

        if (*exp) {
            StreamModel stream = load_stream(exp_ckpt);
            SkeletonSequence seq = load_one_sequence(exp_in, exp_frames, true);
            PointSet6D pred = repaint(stream.model, stream_input(stream, seq));
            std::vector<std::array<double, 6>> rows;
            rows.reserve(static_cast<size_t>(pred.size()));
            for (int64_t i = 0; i < pred.size(); ++i) {
                const double* r = pred.row(i);
                rows.push_back({r[0], r[1], r[2], r[3], r[4], r[5]});
            }
            export_ply(rows, exp_out);
            std::cout << "wrote " << rows.size() << " repainted points to " << exp_out << "\n";
            return 0;
        }

        if (*bench) {
            log_kv("seed", static_cast<int64_t>(bench_seed));
            Rng rng(bench_seed);
            std::cout << "n_points,method,seconds\n";
            for (int64_t n : parse_widths(bench_sizes)) {
                PointSet6D p = PointSet6D::zeros(n), q = PointSet6D::zeros(n);
                Rng prng = rng.fork("p", static_cast<uint64_t>(n));
                for (double& v : p.data) v = prng.uniform(-1.0, 1.0);
                Rng qrng = rng.fork("q", static_cast<uint64_t>(n));
                for (double& v : q.data) v = qrng.uniform(-1.0, 1.0);
                auto t0 = std::chrono::steady_clock::now();
                for (int r = 0; r < bench_reps; ++r) chamfer_max_brute(p, q);
                auto t1 = std::chrono::steady_clock::now();
                for (int r = 0; r < bench_reps; ++r) chamfer_max(p, q);
                auto t2 = std::chrono::steady_clock::now();
                double brute = std::chrono::duration<double>(t1 - t0).count() / bench_reps;
                double kd = std::chrono::duration<double>(t2 - t1).count() / bench_reps;
                std::printf("%lld,brute,%.6f\n", static_cast<long long>(n), brute);
                std::printf("%lld,kdtree,%.6f\n", static_cast<long long>(n), kd);
            }
            return 0;
        }
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace skelpaint
