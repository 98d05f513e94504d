#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace wfo {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 normalized(Vec2 v) {
    const double n = std::hypot(v.x, v.y);
    return n > 0 ? Vec2{v.x / n, v.y / n} : Vec2{1.0, 0.0};
}

// Gaussian sampler with a pinned algorithm (Box-Muller over mt19937_64) so that
// seeded runs are byte-identical across standard library implementations;
// std::normal_distribution leaves the sequence unspecified.
class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}

    double operator()(double mean = 0.0, double sigma = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + sigma * spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return mean + sigma * r * std::cos(a);
    }

    double uniform01() {
        return (rng_() >> 11) * 0x1.0p-53;  // 53-bit mantissa in [0,1)
    }

private:
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace wfo
