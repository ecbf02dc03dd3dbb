#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "epps/constants.hpp"

namespace epps {

// splitmix64 step, used to derive independent sub-stream seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic sampler built on std::mt19937_64. The variate transforms are
// implemented here (not via std::*_distribution) so that identical seeds give
// identical streams on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

  // Box-Muller with one cached variate.
  double normal() {
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    const double r = std::sqrt(-2.0 * std::log1p(-uniform()));
    const double phi = 2.0 * kPi * uniform();
    cache_ = r * std::sin(phi);
    has_cache_ = true;
    return r * std::cos(phi);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  // Exact multiplicative sampling for small means, Gaussian approximation
  // beyond (error negligible at lambda > 256).
  std::uint64_t poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda < 256.0) {
      const double limit = std::exp(-lambda);
      std::uint64_t n = 0;
      double prod = uniform();
      while (prod > limit) {
        ++n;
        prod *= uniform();
      }
      return n;
    }
    const double draw = std::round(lambda + std::sqrt(lambda) * normal());
    return draw <= 0.0 ? 0 : static_cast<std::uint64_t>(draw);
  }

  // Bernoulli loop when cheap, Gaussian approximation for large np(1-p).
  std::uint64_t binomial(std::uint64_t n, double p) {
    if (n == 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    const double np = static_cast<double>(n) * p;
    const double nq = static_cast<double>(n) * (1.0 - p);
    if (np > 1000.0 && nq > 1000.0) {
      const double draw = std::round(np + std::sqrt(np * (1.0 - p)) * normal());
      if (draw <= 0.0) return 0;
      if (draw >= static_cast<double>(n)) return n;
      return static_cast<std::uint64_t>(draw);
    }
    std::uint64_t count = 0;
    for (std::uint64_t i = 0; i < n; ++i) count += bernoulli(p) ? 1 : 0;
    return count;
  }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  double cache_ = 0.0;
  bool has_cache_ = false;
};

}  // namespace epps
