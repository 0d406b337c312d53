#pragma once

#include <array>
#include <string>
#include <vector>

#include "skelpaint/skeleton_data.hpp"

namespace skelpaint {

struct Rgb {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
};

// One stacked skeleton-cloud point with its provenance indices (1-based).
struct CloudPoint {
    double x = 0.0, y = 0.0, z = 0.0;
    int t = 1;  // frame index in [1, T]
    int j = 1;  // joint index in [1, J]
    int n = 1;  // person slot in {1, 2}
};

// Raw skeleton cloud P_r: every joint of every frame stacked into one
// unordered point set. Point order is deterministic: t-major, then n, then j.
struct SkeletonCloud {
    std::vector<CloudPoint> points;
    int frame_count = 0;
    int joint_count = 0;
    int person_count = 0;
};

enum class ColorScheme { Temporal, Spatial, Person };

// A skeleton cloud with a 6D record per point: position plus an RGB color on
// the r+g+b = 1 simplex. Masked-out points carry (0,0,0) and colored = false.
struct ColorizedCloud {
    std::vector<CloudPoint> points;
    std::vector<Rgb> colors;
    std::vector<bool> colored;
    ColorScheme scheme = ColorScheme::Temporal;
    int frame_count = 0;
    int joint_count = 0;
    int person_count = 0;
};

// Piecewise-linear red->green->blue ramps over the temporal / spatial index.
// The branch switch t <= T/2 is evaluated as 2t <= T in exact integers.
Rgb temporal_color(int t, int T);
Rgb spatial_color(int j, int J);
// Person 1 -> red, person 2 -> blue.
Rgb person_color(int n);

SkeletonCloud build_cloud(const SkeletonSequence& seq);

ColorizedCloud colorize_cloud(const SkeletonCloud& cloud, ColorScheme scheme);

// Keeps the scheme color on a stride-uniform subset of index values and
// clears the rest to (0,0,0). At ratio 0.5 this is exactly the odd-index
// rule: odd frames for the temporal and person schemes, odd joints for the
// spatial scheme. The kept set grows monotonically with the ratio (odd
// indices first, then even), so ratio 1 is the identity and ratio 0 clears
// every color.
ColorizedCloud apply_color_mask(const ColorizedCloud& cloud, double ratio = 0.5);

// ASCII PLY with per-vertex x y z and 8-bit red/green/blue = round(255*c).
void export_ply(const ColorizedCloud& cloud, const std::string& path);
// Low-level variant for arbitrary 6D rows (x,y,z,r,g,b); colors are clamped
// to [0,1] before quantization, so predicted clouds can be exported too.
void export_ply(const std::vector<std::array<double, 6>>& rows, const std::string& path);

const char* scheme_name(ColorScheme s);
ColorScheme scheme_from_name(const std::string& name);

}  // namespace skelpaint
