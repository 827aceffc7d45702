#pragma once

// SplitMix64 (Steele, Lea & Flood 2014): a 64-bit Weyl sequence passed
// through a finalizing mixer. Chosen for bit-exact reproducibility from
// a single word of state; the full algorithm is the dozen lines below.
// Seed 0 is reserved for "derive from entropy" at the configuration
// layer and never reaches the generator itself.

#include <cmath>
#include <cstdint>
#include <random>

namespace sivspec::rng {

class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Exponential waiting time for a process of the given rate.
    double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

    /// Standard normal via Box-Muller (two uniforms per value).
    double normal() {
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Poisson count: Knuth product method for small means, rounded
    /// normal approximation beyond (fine for synthetic-data purposes).
    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 64.0) {
            const double limit = std::exp(-mean);
            std::uint64_t k = 0;
            double prod = uniform01();
            while (prod > limit) {
                ++k;
                prod *= uniform01();
            }
            return k;
        }
        const double v = mean + std::sqrt(mean) * normal();
        return v > 0.0 ? static_cast<std::uint64_t>(std::llround(v)) : 0;
    }

  private:
    std::uint64_t state_;
};

/// Resolve a configured seed: 0 means "derive from entropy now".
inline std::uint64_t resolve_seed(std::uint64_t seed) {
    if (seed != 0) return seed;
    std::random_device rd;
    std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    return s ? s : 1;
}

}  // namespace sivspec::rng
