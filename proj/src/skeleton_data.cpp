#include "skelpaint/skeleton_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace skelpaint {

namespace {

bool parse_int(std::string_view s, int& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

// Parses "K=<int>" with the expected key letter.
int header_field(std::string_view tok, char key, const std::string& path) {
    if (tok.size() < 3 || tok[0] != key || tok[1] != '=')
        throw MalformedFile(path + ": bad header field '" + std::string(tok) + "'");
    int v = 0;
    if (!parse_int(tok.substr(2), v))
        throw MalformedFile(path + ": bad header field '" + std::string(tok) + "'");
    return v;
}

void format_double(std::string& out, double v) {
    char buf[32];
    // %.17g round-trips doubles exactly through from_chars.
    int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    out.append(buf, static_cast<size_t>(n));
}

}  // namespace

SkeletonSequence parse_sequence(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open sequence file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw MalformedFile(path + ": empty file");
    auto head = split_ws(line);
    if (head.size() != 5 || head[0] != "SKEL" || head[1] != "v1")
        throw MalformedFile(path + ": expected header 'SKEL v1 T=<int> J=<int> M=<int>'");
    int T = header_field(head[2], 'T', path);
    int J = header_field(head[3], 'J', path);
    int M = header_field(head[4], 'M', path);
    if (T == 0) throw EmptySequence(path + ": sequence has zero frames");
    if (T < 0 || J < 1 || M < 1 || M > 2)
        throw MalformedFile(path + ": invalid header values T=" + std::to_string(T) +
                            " J=" + std::to_string(J) + " M=" + std::to_string(M));

    SkeletonSequence seq;
    seq.joint_count = J;
    seq.frames.assign(static_cast<size_t>(T), Frame{});
    for (auto& f : seq.frames) f.persons.assign(static_cast<size_t>(M), PersonFrame{std::vector<Joint>(static_cast<size_t>(J))});

    int64_t expected = static_cast<int64_t>(T) * M * J;
    int64_t row = 0;
    while (std::getline(in, line)) {
        auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() != 6) throw MalformedFile(path + ": expected 6 fields per data line, got " + std::to_string(toks.size()));
        if (row >= expected) throw MalformedFile(path + ": more data lines than T*M*J");
        int t = 0, n = 0, j = 0;
        double x = 0, y = 0, z = 0;
        if (!parse_int(toks[0], t) || !parse_int(toks[1], n) || !parse_int(toks[2], j) ||
            !parse_double(toks[3], x) || !parse_double(toks[4], y) || !parse_double(toks[5], z))
            throw MalformedFile(path + ": unparsable data line '" + line + "'");
        // t-major, then n, then j; 1-based indices must match the row position.
        int want_t = static_cast<int>(row / (static_cast<int64_t>(M) * J)) + 1;
        int want_n = static_cast<int>((row / J) % M) + 1;
        int want_j = static_cast<int>(row % J) + 1;
        if (t != want_t || n != want_n || j != want_j)
            throw MalformedFile(path + ": data line out of order, expected t=" + std::to_string(want_t) +
                                " n=" + std::to_string(want_n) + " j=" + std::to_string(want_j));
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
            throw NonFiniteJoint(path + ": non-finite coordinate at t=" + std::to_string(t) +
                                 " n=" + std::to_string(n) + " j=" + std::to_string(j));
        seq.frames[static_cast<size_t>(t - 1)].persons[static_cast<size_t>(n - 1)].joints[static_cast<size_t>(j - 1)] = Joint{x, y, z};
        ++row;
    }
    if (row != expected)
        throw MalformedFile(path + ": expected " + std::to_string(expected) + " data lines, got " + std::to_string(row));
    return seq;
}

void write_sequence(const SkeletonSequence& seq, const std::string& path) {
    if (seq.frames.empty()) throw EmptySequence("cannot write a sequence with zero frames");
    int T = seq.frame_count();
    int M = seq.person_count();
    int J = seq.joint_count;

    std::string out;
    out.reserve(static_cast<size_t>(T) * M * J * 48 + 64);
    out += "SKEL v1 T=" + std::to_string(T) + " J=" + std::to_string(J) + " M=" + std::to_string(M) + "\n";
    for (int t = 0; t < T; ++t) {
        for (int n = 0; n < M; ++n) {
            const auto& joints = seq.frames[static_cast<size_t>(t)].persons[static_cast<size_t>(n)].joints;
            for (int j = 0; j < J; ++j) {
                out += std::to_string(t + 1);
                out += ' ';
                out += std::to_string(n + 1);
                out += ' ';
                out += std::to_string(j + 1);
                const Joint& v = joints[static_cast<size_t>(j)];
                out += ' ';
                format_double(out, v.x);
                out += ' ';
                format_double(out, v.y);
                out += ' ';
                format_double(out, v.z);
                out += '\n';
            }
        }
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << out;
    if (!f) throw IoError("write failed: " + path);
}

SkeletonSequence sample_frames(const SkeletonSequence& seq, int T) {
    if (seq.frames.empty()) throw EmptySequence("sample_frames on empty sequence");
    if (T < 1) throw IndexOutOfRange("sample_frames: T must be >= 1, got " + std::to_string(T));

    int Tp = seq.frame_count();
    // Cyclic extension to the smallest multiple of T' that reaches T.
    std::vector<int> base;
    int L = Tp;
    if (Tp < T) L = ((T + Tp - 1) / Tp) * Tp;
    base.reserve(static_cast<size_t>(L));
    for (int i = 0; i < L; ++i) base.push_back(i % Tp);

    SkeletonSequence out;
    out.joint_count = seq.joint_count;
    out.meta = seq.meta;
    out.frames.reserve(static_cast<size_t>(T));
    for (int i = 0; i < T; ++i) {
        int idx = static_cast<int>(std::lround(static_cast<double>(i) * L / T));
        idx = std::clamp(idx, 0, L - 1);
        out.frames.push_back(seq.frames[static_cast<size_t>(base[static_cast<size_t>(idx)])]);
    }
    return out;
}

SkeletonSequence normalize_sequence(const SkeletonSequence& seq, int root_joint) {
    if (seq.frames.empty()) throw EmptySequence("normalize_sequence on empty sequence");
    if (root_joint < 0 || root_joint >= seq.joint_count)
        throw IndexOutOfRange("normalize_sequence: root joint " + std::to_string(root_joint) + " out of range");

    int M = seq.person_count();
    std::vector<bool> keep(static_cast<size_t>(M), false);
    for (int n = 0; n < M; ++n) {
        for (const auto& f : seq.frames) {
            for (const auto& j : f.persons[static_cast<size_t>(n)].joints) {
                if (j.x != 0.0 || j.y != 0.0 || j.z != 0.0) {
                    keep[static_cast<size_t>(n)] = true;
                    break;
                }
            }
            if (keep[static_cast<size_t>(n)]) break;
        }
    }
    // A fully zero recording keeps slot 1 so the result stays non-empty.
    if (std::none_of(keep.begin(), keep.end(), [](bool b) { return b; })) keep[0] = true;

    SkeletonSequence out;
    out.joint_count = seq.joint_count;
    out.meta = seq.meta;
    out.frames.reserve(seq.frames.size());
    for (const auto& f : seq.frames) {
        Frame nf;
        for (int n = 0; n < M; ++n)
            if (keep[static_cast<size_t>(n)]) nf.persons.push_back(f.persons[static_cast<size_t>(n)]);
        out.frames.push_back(std::move(nf));
    }

    const Joint root = out.frames[0].persons[0].joints[static_cast<size_t>(root_joint)];
    for (auto& f : out.frames)
        for (auto& p : f.persons)
            for (auto& j : p.joints) {
                j.x -= root.x;
                j.y -= root.y;
                j.z -= root.z;
            }
    return out;
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    std::filesystem::path dir = std::filesystem::path(path).parent_path();

    DatasetManifest m;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        size_t start = 0;
        for (size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == '\t') {
                cols.push_back(line.substr(start, i - start));
                start = i + 1;
            }
        }
        if (cols.size() != 4)
            throw MalformedFile(path + ":" + std::to_string(line_no) + ": expected 4 tab-separated columns");
        ManifestEntry e;
        std::filesystem::path p(cols[0]);
        e.path = p.is_absolute() ? p.string() : (dir / p).string();
        if (!parse_int(cols[1], e.label) || !parse_int(cols[2], e.subject) || !parse_int(cols[3], e.view))
            throw MalformedFile(path + ":" + std::to_string(line_no) + ": bad integer column");
        if (!std::filesystem::exists(e.path))
            throw IoError(path + ":" + std::to_string(line_no) + ": referenced file missing: " + e.path);
        m.entries.push_back(std::move(e));
    }
    if (m.entries.empty()) throw MalformedFile(path + ": manifest lists no sequences");

    int max_label = 0;
    for (const auto& e : m.entries) {
        if (e.label < 0) throw MalformedFile(path + ": negative label " + std::to_string(e.label));
        max_label = std::max(max_label, e.label);
    }
    m.class_count = max_label + 1;

    SkeletonSequence first = parse_sequence(m.entries[0].path);
    m.joint_count = first.joint_count;
    m.max_persons = first.person_count();
    return m;
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    for (const auto& e : manifest.entries)
        f << e.path << '\t' << e.label << '\t' << e.subject << '\t' << e.view << '\n';
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace skelpaint
