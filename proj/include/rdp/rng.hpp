#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace rdp {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based expansion of a base seed: stream `counter` of `base`.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t counter) {
    return splitmix64(splitmix64(base) ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
}

/// Seeded generator with platform-independent uniform and normal draws.
///
/// std::normal_distribution and friends are implementation-defined, so the
/// variates are derived from raw engine output directly to keep streams
/// bit-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace rdp
