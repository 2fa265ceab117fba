#include "rldyn/advantage.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rldyn::gae {

GaeResult compute_gae(const std::vector<double>& rewards,
                      const std::vector<double>& values, double bootstrap_value,
                      const std::vector<bool>& terminated, const GaeConfig& cfg) {
  const std::size_t t_len = rewards.size();
  if (values.size() != t_len || terminated.size() != t_len) {
    throw std::invalid_argument(
        "compute_gae: rewards/values/terminated lengths differ (" +
        std::to_string(t_len) + ", " + std::to_string(values.size()) + ", " +
        std::to_string(terminated.size()) + ")");
  }
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0 && cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) {
    throw std::invalid_argument("compute_gae: gamma and lambda must be in [0,1]");
  }

  GaeResult out;
  out.advantages.resize(t_len);
  out.returns.resize(t_len);
  double next_advantage = 0.0;
  for (std::size_t i = t_len; i-- > 0;) {
    const double not_done = terminated[i] ? 0.0 : 1.0;
    const double next_value = (i + 1 < t_len) ? values[i + 1] : bootstrap_value;
    const double delta = rewards[i] + cfg.gamma * next_value * not_done - values[i];
    next_advantage = delta + cfg.gamma * cfg.lambda * not_done * next_advantage;
    out.advantages[i] = next_advantage;
    out.returns[i] = next_advantage + values[i];
  }
  return out;
}

std::vector<double> normalize_advantages(const std::vector<double>& advantages) {
  if (advantages.size() < 2) {
    throw std::invalid_argument("normalize_advantages: minibatch must have >= 2 samples");
  }
  const double n = static_cast<double>(advantages.size());
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  var /= n;
  const double denom = std::sqrt(var) + 1e-8;
  std::vector<double> out(advantages.size());
  for (std::size_t i = 0; i < advantages.size(); ++i) out[i] = (advantages[i] - mean) / denom;
  return out;
}

}  // namespace rldyn::gae
