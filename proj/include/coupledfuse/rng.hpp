#pragma once

#include <cmath>
#include <cstdint>

namespace cfuse {

/// Counter-based pseudo-random generator (SplitMix64).
///
/// The i-th output is a pure function of (seed, i): the generator hashes
/// seed + i * golden-gamma through the SplitMix64 finalizer. Identical
/// seeds replay identical streams on any build, which is what makes
/// synthetic data and solver traces reproducible.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1) with 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal deviate, Box-Muller; the paired value is cached.
    double next_normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        // u1 in (0, 1] so the log is finite.
        const double u1 = 1.0 - next_double();
        const double u2 = next_double();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        cached_ = radius * std::sin(angle);
        has_cached_ = true;
        return radius * std::cos(angle);
    }

    /// Laplace(0, scale) by inverse CDF: draw u uniform on (-1/2, 1/2) and
    /// return -scale * sign(u) * ln(1 - 2|u|).
    double next_laplace(double scale) {
        const double u = next_double() - 0.5;
        if (u == 0.0) return 0.0;
        double tail = 1.0 - 2.0 * std::abs(u);
        if (tail < 1e-300) tail = 1e-300;  // u == -1/2 would give an infinite draw
        const double sign = u < 0.0 ? -1.0 : 1.0;
        return -scale * sign * std::log(tail);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace cfuse
