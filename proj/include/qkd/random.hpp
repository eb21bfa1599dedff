#pragma once

// Seedable randomness for the Monte Carlo layer. One RandomSource per
// session; every stochastic draw in a simulation flows through it, so a
// (config, seed) pair reproduces a run bit for bit.
//
// The uniform and gaussian draws are built by hand on top of mt19937_64
// instead of <random> distributions, whose output is implementation-defined.

#include <cmath>
#include <cstdint>
#include <random>

namespace qkd {

class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in (0, 1], 53-bit resolution.
    double uniform01() {
        return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
    }

    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return uniform01() <= p;
    }

    /// N(0, sigma^2) via Box-Muller. Two uniforms per draw, no caching, so
    /// the consumption pattern stays easy to reason about in replay tests.
    double gaussian(double sigma) {
        double u1 = uniform01();
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        return sigma * r * std::cos(6.28318530717958647692 * u2);
    }

    /// Uniform bit, taken from the high bit of the engine output.
    int coin() { return static_cast<int>(engine_() >> 63); }

private:
    std::mt19937_64 engine_;
};

} // namespace qkd
