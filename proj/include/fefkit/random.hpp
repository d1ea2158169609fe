#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace fefkit {

/// Seeded Gaussian sampler.
///
/// Draws standard normals with an explicit Box-Muller transform on top of
/// mt19937_64 so that streams are reproducible bit-for-bit for a given seed,
/// independent of the standard library's distribution internals.
class GaussianSampler {
  public:
    explicit GaussianSampler(std::uint64_t seed) : engine_(seed) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0,1], u2 in [0,1)
        const double u1 = 1.0 - uniform01();
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    Eigen::VectorXd vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = (*this)();
        return v;
    }

    /// Uniform double in [0,1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    std::uint64_t integer() { return engine_(); }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// splitmix64 step; used to derive independent seed streams from one seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace fefkit
