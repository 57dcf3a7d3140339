#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "spinsplit/errors.hpp"

namespace spinsplit {

// splitmix64 step; used to derive per-shot seeds from a master seed so that
// shots form independent streams regardless of generation order.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Random stream with hand-rolled variate transforms. mt19937_64 output is
// pinned by the standard, and keeping the uniform/normal transforms in-house
// makes datasets bit-reproducible across standard library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t bits() { return engine_(); }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform on {0, 1, ..., n-1}, rejection-sampled to avoid modulo bias.
    std::uint64_t uniform_index(std::uint64_t n) {
        require(n > 0, ErrorCategory::internal, "uniform_index: empty range");
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller; the paired variate is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Deterministic per-shot seed schedule derived from one master seed.
class SeedSchedule {
public:
    explicit SeedSchedule(std::uint64_t master) : master_(master) {}

    std::uint64_t master() const { return master_; }

    std::uint64_t shot_seed(std::uint64_t shot_index) const {
        std::uint64_t s = master_ ^ (0x5851f42d4c957f2dULL * (shot_index + 1));
        std::uint64_t a = splitmix64(s);
        std::uint64_t b = splitmix64(s);
        return a ^ (b << 1);
    }

private:
    std::uint64_t master_;
};

}  // namespace spinsplit
