#pragma once

/// \file
/// Seeded random blocks. The generator is std::mt19937_64, whose output
/// sequence is fixed by the standard; normals come from Box-Muller on 53-bit
/// uniforms (not std::normal_distribution, whose algorithm is unspecified),
/// so a seed reproduces the same block on every platform.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "nschur/dense.hpp"

namespace nschur {

class SketchRng {
 public:
  explicit SketchRng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do u1 = uniform();
    while (u1 == 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// n-by-m block of i.i.d. standard normals, filled column by column.
inline DenseBlock gaussian_sketch(Index n, Index m, std::uint64_t seed) {
  SketchRng rng(seed);
  DenseBlock G(n, m);
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < n; ++i) G(i, j) = rng.normal();
  return G;
}

/// n-by-m block of uniforms in [0, 1), filled column by column.
inline DenseBlock uniform_block(Index n, Index m, std::uint64_t seed) {
  SketchRng rng(seed);
  DenseBlock U(n, m);
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < n; ++i) U(i, j) = rng.uniform();
  return U;
}

}  // namespace nschur
