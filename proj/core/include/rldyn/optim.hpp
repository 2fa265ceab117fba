#pragma once

#include <cstddef>
#include <vector>

namespace rldyn::optim {

struct AdamConfig {
  double learning_rate = 2.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Per-parameter Adam moments plus the shared step count.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;

  explicit AdamState(std::size_t size = 0) : m(size, 0.0), v(size, 0.0) {}

  void reset() {
    std::fill(m.begin(), m.end(), 0.0);
    std::fill(v.begin(), v.end(), 0.0);
    step = 0;
  }
};

/// One bias-corrected Adam descent step, in place on the flattened values.
void adam_step(std::vector<double>& values, const std::vector<double>& gradients,
               AdamState& state, const AdamConfig& cfg);

/// If the global L2 norm exceeds max_norm, scale every gradient by
/// max_norm / norm; returns the pre-clip norm.
double clip_grad_norm(std::vector<double>& gradients, double max_norm);

}  // namespace rldyn::optim
