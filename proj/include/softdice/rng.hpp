#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "softdice/tensor.hpp"

namespace softdice {

/// Deterministic random stream. Distribution transforms are implemented here
/// (rather than with std:: distributions) so that sequences are identical
/// across standard library versions, which the reproducibility contract
/// relies on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller. The second value of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * M_PI * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }

  bool bernoulli(double p) { return uniform() < p; }

  Tensor normal_tensor(std::size_t rows, std::size_t cols, double stddev = 1.0) {
    Tensor t(rows, cols);
    for (double& v : t.data()) v = stddev * normal();
    return t;
  }

  Tensor uniform_tensor(std::size_t rows, std::size_t cols, double lo, double hi) {
    Tensor t(rows, cols);
    for (double& v : t.data()) v = uniform(lo, hi);
    return t;
  }

  /// Derived, decorrelated stream for a sub-task (splitmix64 of seed ^ tag).
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace softdice
