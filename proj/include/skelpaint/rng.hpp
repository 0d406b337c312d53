#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace skelpaint {

// Deterministic random source. All randomness in the library flows from one
// master seed; independent streams are derived with fork(label), which mixes
// an FNV-1a hash of the label into the seed through SplitMix64. Identical
// (seed, label) pairs give identical streams on every platform.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(splitmix(seed + 0x9e3779b97f4a7c15ull)) {}

    // Derive an independent child stream named by `label` (and an optional
    // numeric index, so loops can fork one stream per iteration).
    Rng fork(std::string_view label, uint64_t index = 0) const {
        uint64_t h = 1469598103934665603ull;  // FNV-1a 64-bit offset basis
        for (char c : label) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        h ^= index + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        return Rng(splitmix(state_ ^ h));
    }

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix(state_);
    }

    // Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; avoids the implementation-defined
    // std::normal_distribution so streams are portable.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    static uint64_t splitmix(uint64_t z) { return mix(z + 0x9e3779b97f4a7c15ull); }

    uint64_t state_;
};

}  // namespace skelpaint
