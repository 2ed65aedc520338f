#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace vitse {

// Deterministic random source. std::mt19937_64 output is pinned by the
// standard, but the standard distributions are not, so every distribution
// here is derived explicitly from the raw 64-bit stream. Two Rng instances
// with the same seed produce identical draws on any platform.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), rejection sampled to avoid modulo bias.
    uint64_t uniform_int(uint64_t n) {
        if (n <= 1) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return r % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Normal(0, std) resampled until within [-clip, clip].
    double truncated_normal(double std_dev, double clip) {
        double z;
        do {
            z = normal() * std_dev;
        } while (std::abs(z) > clip);
        return z;
    }

    // Symmetric Beta(alpha, alpha) via Johnk's algorithm; alpha <= 0 yields 1
    // (the "no mixing" convention).
    double beta_symmetric(double alpha) {
        if (alpha <= 0.0) return 1.0;
        for (;;) {
            const double x = std::pow(uniform(), 1.0 / alpha);
            const double y = std::pow(uniform(), 1.0 / alpha);
            const double s = x + y;
            if (s > 0.0 && s <= 1.0) return x / s;
        }
    }

    // Fisher-Yates with the explicit integer draw above.
    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<uint64_t>(last - first);
        for (uint64_t i = n; i > 1; --i) {
            const uint64_t j = uniform_int(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

// Derives an independent stream seed from a base seed and a role tag
// (splitmix64 finalizer).
inline uint64_t derive_seed(uint64_t seed, uint64_t tag) {
    uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace vitse
