#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "deloclab/errors.hpp"

namespace deloclab {

// SplitMix64. All sampling in the project goes through this generator so that
// results are bit-reproducible across platforms and standard-library versions
// (std::normal_distribution et al. are implementation-defined).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // Marsaglia polar method; avoids trig for speed and keeps the stream
    // consumption pattern simple.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    double gaussian(double mean, double sd) { return mean + sd * gaussian(); }

    // -1 or +1 with probability 1/2 each.
    double sign() { return (next_u64() & 1u) ? 1.0 : -1.0; }

    // Index into a discrete table given cumulative probabilities (last = 1).
    std::size_t categorical(const std::vector<double>& cumulative) {
        const double u = uniform01();
        for (std::size_t i = 0; i + 1 < cumulative.size(); ++i) {
            if (u < cumulative[i]) return i;
        }
        return cumulative.empty() ? 0 : cumulative.size() - 1;
    }

    std::uint64_t uniform_below(std::uint64_t n) {
        // Rejection-free modulo is fine here; n is always tiny relative to 2^64.
        return next_u64() % n;
    }

  private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Injective (base_seed, index) -> stream seed map; trial i of a run draws from
// Rng(derive_stream_seed(base, i)) so trials can execute in any order or in
// parallel without coordinating state.
inline std::uint64_t derive_stream_seed(std::uint64_t base_seed, std::uint64_t index) {
    return mix64(base_seed ^ 0xD1B54A32D192ED03ULL) ^ mix64(index * 0x9E3779B97F4A7C15ULL + 1);
}

}  // namespace deloclab
