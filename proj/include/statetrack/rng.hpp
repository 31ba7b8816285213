#pragma once

#include <cmath>
#include <cstdint>

namespace statetrack {

// Deterministic PRNG with fully specified output, so that generated artifacts
// are byte-identical across runs. SplitMix64 core; bounded ints by rejection,
// normals by Box-Muller. std::random distributions are implementation-defined
// and are deliberately not used.
class Rng {
 public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Unbiased integer in [0, bound), bound >= 1.
    uint64_t below(uint64_t bound) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % bound;
    }

    int range_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    // Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool coin() { return (next_u64() & 1u) != 0; }

    // Standard normal. Draws exactly two uniforms per call; the sine branch is
    // discarded to keep the consumption pattern independent of call sites.
    double normal() {
        double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

 private:
    uint64_t state_;
};

}  // namespace statetrack
