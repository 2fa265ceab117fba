#pragma once

#include <vector>

namespace rldyn::gae {

struct GaeConfig {
  double gamma = 0.99;
  double lambda = 0.95;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantages + values, elementwise
};

/// Backward GAE recursion over one contiguous segment of T steps:
///   delta_t = r_t + gamma * V(S_{t+1}) * (1 - terminated_t) - V(S_t)
///   A_t     = delta_t + gamma * lambda * (1 - terminated_t) * A_{t+1}
/// with V(S_T) = bootstrap_value (pass 0 when the segment ends terminated).
/// Termination mid-segment resets the recursion.
GaeResult compute_gae(const std::vector<double>& rewards,
                      const std::vector<double>& values, double bootstrap_value,
                      const std::vector<bool>& terminated, const GaeConfig& cfg);

/// (A - mean) / (std + 1e-8) with the population standard deviation,
/// computed over one minibatch. Requires at least 2 elements.
std::vector<double> normalize_advantages(const std::vector<double>& advantages);

}  // namespace rldyn::gae
