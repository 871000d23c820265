#pragma once

#include <cmath>
#include <cstdint>

namespace reprocs {

// Counter-based pseudo-random generator: the i-th output is
// SplitMix64(seed + i * GAMMA), i.e. the standard SplitMix64 finalizer
// applied to an affine counter. Seeds are portable across platforms and
// implementations because every draw is a pure function of (seed, i).
//
// Distributions are derived deterministically from the 64-bit stream:
//   uniform01: 53-bit mantissa in [0, 1)
//   uniform(a, b): a + (b - a) * uniform01
//   normal: Box-Muller on two consecutive uniforms
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform on [0, 1).
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on [a, b).
    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // Standard normal via Box-Muller; consumes two draws per sample.
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        // Guard the log against u1 == 0.
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Uniform integer on [lo, hi], inclusive. Uses rejection to stay unbiased.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1u;
        const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % span);
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit && span != 0);
        return lo + static_cast<std::int64_t>(v % span);
    }

    // Derives an independent stream for a named purpose. Mixing the tag
    // through the finalizer keeps derived streams decorrelated.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
        Rng r(seed ^ (0xA0761D6478BD642Full + tag * 0xE7037ED1A0B428DBull));
        return r.next_u64();
    }

private:
    std::uint64_t state_;
};

}  // namespace reprocs
