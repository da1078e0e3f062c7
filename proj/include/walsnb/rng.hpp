#pragma once

// Portable random number generation. The engine is std::mt19937_64 (its
// output sequence is fixed by the standard); the variate transforms below
// are hand-rolled because the std distributions are implementation-defined
// and the simulation engine promises bit-identical streams across
// platforms and thread counts.
//
// Streams are derived by counter-based splitting: every (seed, tag...)
// combination maps to an independent engine seed via splitmix64 mixing,
// so per-run streams never depend on scheduling.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace walsnb {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed) { return splitmix64(seed); }

template <typename... Rest>
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag, Rest... rest) {
    return mix_seed(splitmix64(seed ^ splitmix64(tag)), rest...);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    template <typename... Tags>
    static Rng from_stream(std::uint64_t seed, Tags... tags) {
        return Rng(mix_seed(seed, static_cast<std::uint64_t>(tags)...));
    }

    std::uint64_t next_u64() { return engine_(); }

    // uniform on [0, 1) with 53 random bits
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // Box-Muller; the spare value is cached so each call consumes a
    // deterministic amount of the stream.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586477 * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    // Marsaglia-Tsang, shape boost for shape < 1.
    double gamma(double shape, double scale) {
        if (!(shape > 0.0) || !(scale > 0.0)) {
            throw std::domain_error("gamma: shape and scale must be positive");
        }
        if (shape < 1.0) {
            const double u = uniform01();
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x;
            double v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform01();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
                return d * v * scale;
            }
        }
    }

    // Inversion by multiplication for small means, Hormann's PTRS
    // transformed rejection otherwise.
    std::uint64_t poisson(double lambda) {
        if (!(lambda >= 0.0)) {
            throw std::domain_error("poisson: mean must be nonnegative");
        }
        if (lambda == 0.0) return 0;
        if (lambda < 10.0) {
            const double limit = std::exp(-lambda);
            std::uint64_t k = 0;
            double prod = uniform01();
            while (prod > limit) {
                ++k;
                prod *= uniform01();
            }
            return k;
        }
        return poisson_ptrs(lambda);
    }

private:
    std::uint64_t poisson_ptrs(double lambda) {
        const double slam = std::sqrt(lambda);
        const double loglam = std::log(lambda);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = uniform01() - 0.5;
            const double v = uniform01();
            const double us = 0.5 - std::fabs(u);
            const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
            if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
            if (k < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b)
                    <= k * loglam - lambda - std::lgamma(k + 1.0)) {
                return static_cast<std::uint64_t>(k);
            }
        }
    }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace walsnb
