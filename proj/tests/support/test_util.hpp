#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "rldyn/autodiff.hpp"
#include "rldyn/rng.hpp"

namespace rldyn::testutil {

/// Error relative to the larger magnitude, floored so that near-zero
/// gradients are compared absolutely at 1e-2 scale.
inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-2});
  return std::abs(a - b) / scale;
}

inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_err(a[i], b[i]));
  return worst;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng,
                            double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = lo + (hi - lo) * rng.uniform();
  return m;
}

}  // namespace rldyn::testutil
