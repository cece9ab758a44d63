#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "abc/tensor.hpp"

namespace abc {

/// Seeded generator with platform-independent output. std::mt19937_64's
/// sequence is fixed by the standard; the distributions below are written
/// out so their results do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) { return engine_() % n; }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

/// Stateless seed mixing (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline Tensor random_uniform(Shape shape, real lo, real hi, Rng& rng, bool requires_grad = false) {
  std::vector<real> data(shape_numel(shape));
  for (real& v : data) v = static_cast<real>(rng.uniform(lo, hi));
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

}  // namespace abc
