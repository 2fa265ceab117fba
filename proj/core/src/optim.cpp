#include "rldyn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace rldyn::optim {

void adam_step(std::vector<double>& values, const std::vector<double>& gradients,
               AdamState& state, const AdamConfig& cfg) {
  if (values.size() != gradients.size() || values.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: size mismatch between values, "
                                "gradients, and state");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double g = gradients[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    values[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

double clip_grad_norm(std::vector<double>& gradients, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_grad_norm: max_norm must be > 0");
  double sq = 0.0;
  for (double g : gradients) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : gradients) g *= scale;
  }
  return norm;
}

}  // namespace rldyn::optim
