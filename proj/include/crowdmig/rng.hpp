#pragma once

#include "crowdmig/types.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace crowdmig {

// splitmix64; used to derive independent per-row seeds from (seed, index).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic RNG built on std::mt19937_64 with hand-rolled
/// distributions, so sampled bytes are identical across standard
/// libraries (std::*_distribution algorithms are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inverse-CDF draw from an unnormalized nonnegative weight vector.
  int categorical(const Vec& weights) {
    const double total = weights.sum();
    double u = uniform() * total;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
      u -= weights(i);
      if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size() - 1);  // fp slack lands on the last class
  }

  // Box-Muller; one value per call, no caching, so draws are positionally stable.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

  // Random point in the interior of the simplex (entries >= floor).
  Vec simplex_point(Eigen::Index classes, double floor = 0.02) {
    Vec v(classes);
    for (Eigen::Index i = 0; i < classes; ++i) v(i) = floor + uniform();
    return v / v.sum();
  }

  template <class It>
  void shuffle(It first, It last) {
    // Fisher-Yates with our own index draws, for cross-platform stability.
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const std::uint64_t j = bounded(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  // Unbiased draw in [0, bound) via rejection.
  std::uint64_t bounded(std::uint64_t bound) {
    const std::uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod bound
    for (;;) {
      const std::uint64_t r = gen_();
      if (r >= threshold) return r % bound;
    }
  }

  std::mt19937_64 gen_;
};

}  // namespace crowdmig
