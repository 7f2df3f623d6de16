#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace credal {

/// Deterministic 64-bit generator (xoshiro256**) seeded through splitmix64.
/// The library never uses <random> distributions: their output is
/// implementation-defined, and every experiment here must be bit-reproducible
/// from (seed, stream). `derive` hashes a (master seed, stream id) pair so
/// replications and samplers get independent streams.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    static Rng derive(std::uint64_t master_seed, std::uint64_t stream) {
        std::uint64_t x = master_seed;
        std::uint64_t a = splitmix64(x);
        x ^= 0x9e3779b97f4a7c15ULL + stream;
        std::uint64_t b = splitmix64(x);
        return Rng(a ^ (b + 0x2545f4914f6cdd1dULL * (stream + 1)));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on (0,1): 53 random bits, never exactly 0 or 1.
    double uniform01() {
        double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return u == 0.0 ? 0x1.0p-53 : u;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    std::size_t uniform_index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
        // Rejection to avoid modulo bias.
        const std::uint64_t bound = n;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return static_cast<std::size_t>(v % bound);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Standard normal via Box-Muller (cosine branch only, so the draw count
    /// per call is fixed).
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    /// Gamma(shape, rate 1) via Marsaglia-Tsang; shapes below one use the
    /// boost trick G(a) = G(a+1) * U^{1/a}.
    double gamma(double shape) {
        if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be positive");
        if (shape < 1.0) {
            double u = uniform01();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        while (true) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform01();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double chi_square(double dof) { return 2.0 * gamma(0.5 * dof); }

  private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
};

}  // namespace credal
