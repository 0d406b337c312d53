#include "skelpaint/colorize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "skelpaint/errors.hpp"

namespace skelpaint {

Rgb temporal_color(int t, int T) {
    if (t < 1 || t > T)
        throw IndexOutOfRange("temporal_color: t=" + std::to_string(t) + " outside [1," + std::to_string(T) + "]");
    double x = static_cast<double>(t) / T;
    if (2 * t <= T) return Rgb{-2.0 * x + 1.0, 2.0 * x, 0.0};
    return Rgb{0.0, -2.0 * x + 2.0, 2.0 * x - 1.0};
}

Rgb spatial_color(int j, int J) {
    if (j < 1 || j > J)
        throw IndexOutOfRange("spatial_color: j=" + std::to_string(j) + " outside [1," + std::to_string(J) + "]");
    double x = static_cast<double>(j) / J;
    if (2 * j <= J) return Rgb{-2.0 * x + 1.0, 2.0 * x, 0.0};
    return Rgb{0.0, -2.0 * x + 2.0, 2.0 * x - 1.0};
}

Rgb person_color(int n) {
    if (n == 1) return Rgb{1.0, 0.0, 0.0};
    if (n == 2) return Rgb{0.0, 0.0, 1.0};
    throw IndexOutOfRange("person_color: n=" + std::to_string(n) + " not in {1,2}");
}

SkeletonCloud build_cloud(const SkeletonSequence& seq) {
    if (seq.frames.empty()) throw EmptySequence("build_cloud on empty sequence");
    SkeletonCloud cloud;
    cloud.frame_count = seq.frame_count();
    cloud.joint_count = seq.joint_count;
    cloud.person_count = seq.person_count();
    cloud.points.reserve(static_cast<size_t>(cloud.frame_count) * cloud.person_count * cloud.joint_count);
    for (int t = 0; t < cloud.frame_count; ++t) {
        const Frame& f = seq.frames[static_cast<size_t>(t)];
        for (int n = 0; n < cloud.person_count; ++n) {
            const auto& joints = f.persons[static_cast<size_t>(n)].joints;
            for (int j = 0; j < cloud.joint_count; ++j) {
                const Joint& v = joints[static_cast<size_t>(j)];
                cloud.points.push_back(CloudPoint{v.x, v.y, v.z, t + 1, j + 1, n + 1});
            }
        }
    }
    return cloud;
}

ColorizedCloud colorize_cloud(const SkeletonCloud& cloud, ColorScheme scheme) {
    ColorizedCloud out;
    out.points = cloud.points;
    out.scheme = scheme;
    out.frame_count = cloud.frame_count;
    out.joint_count = cloud.joint_count;
    out.person_count = cloud.person_count;
    out.colors.reserve(cloud.points.size());
    for (const CloudPoint& p : cloud.points) {
        switch (scheme) {
            case ColorScheme::Temporal: out.colors.push_back(temporal_color(p.t, cloud.frame_count)); break;
            case ColorScheme::Spatial: out.colors.push_back(spatial_color(p.j, cloud.joint_count)); break;
            case ColorScheme::Person: out.colors.push_back(person_color(p.n)); break;
        }
    }
    out.colored.assign(cloud.points.size(), true);
    return out;
}

namespace {

// Index values 1..count kept at the given ratio: the first ceil(ratio*count)
// entries of the fixed priority order [1,3,5,...,2,4,6,...].
std::vector<bool> kept_indices(int count, double ratio) {
    std::vector<int> order;
    order.reserve(static_cast<size_t>(count));
    for (int v = 1; v <= count; v += 2) order.push_back(v);
    for (int v = 2; v <= count; v += 2) order.push_back(v);
    int kept = static_cast<int>(std::ceil(ratio * count));
    kept = std::clamp(kept, 0, count);
    std::vector<bool> keep(static_cast<size_t>(count + 1), false);
    for (int i = 0; i < kept; ++i) keep[static_cast<size_t>(order[static_cast<size_t>(i)])] = true;
    return keep;
}

}  // namespace

ColorizedCloud apply_color_mask(const ColorizedCloud& cloud, double ratio) {
    if (!(ratio >= 0.0 && ratio <= 1.0))
        throw IndexOutOfRange("apply_color_mask: ratio must lie in [0,1]");
    // The spatial scheme masks over joint indices; temporal and person
    // schemes mask over frame indices.
    bool by_joint = cloud.scheme == ColorScheme::Spatial;
    int domain = by_joint ? cloud.joint_count : cloud.frame_count;
    std::vector<bool> keep = kept_indices(domain, ratio);

    ColorizedCloud out = cloud;
    for (size_t i = 0; i < out.points.size(); ++i) {
        int idx = by_joint ? out.points[i].j : out.points[i].t;
        if (out.colored[i] && keep[static_cast<size_t>(idx)]) continue;
        out.colors[i] = Rgb{0.0, 0.0, 0.0};
        out.colored[i] = false;
    }
    return out;
}

namespace {

void write_ply_rows(const std::vector<std::array<double, 6>>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "ply\nformat ascii 1.0\nelement vertex " << rows.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    char buf[96];
    for (const auto& r : rows) {
        int red = static_cast<int>(std::lround(255.0 * std::clamp(r[3], 0.0, 1.0)));
        int green = static_cast<int>(std::lround(255.0 * std::clamp(r[4], 0.0, 1.0)));
        int blue = static_cast<int>(std::lround(255.0 * std::clamp(r[5], 0.0, 1.0)));
        std::snprintf(buf, sizeof buf, "%g %g %g %d %d %d\n", r[0], r[1], r[2], red, green, blue);
        f << buf;
    }
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace

void export_ply(const ColorizedCloud& cloud, const std::string& path) {
    std::vector<std::array<double, 6>> rows;
    rows.reserve(cloud.points.size());
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        const CloudPoint& p = cloud.points[i];
        const Rgb& c = cloud.colors[i];
        rows.push_back({p.x, p.y, p.z, c.r, c.g, c.b});
    }
    write_ply_rows(rows, path);
}

void export_ply(const std::vector<std::array<double, 6>>& rows, const std::string& path) {
    write_ply_rows(rows, path);
}

const char* scheme_name(ColorScheme s) {
    switch (s) {
        case ColorScheme::Temporal: return "temporal";
        case ColorScheme::Spatial: return "spatial";
        case ColorScheme::Person: return "person";
    }
    return "temporal";
}

ColorScheme scheme_from_name(const std::string& name) {
    if (name == "temporal") return ColorScheme::Temporal;
    if (name == "spatial") return ColorScheme::Spatial;
    if (name == "person") return ColorScheme::Person;
    throw IndexOutOfRange("unknown color scheme: " + name);
}

}  // namespace skelpaint
