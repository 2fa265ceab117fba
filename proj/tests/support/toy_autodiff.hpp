#pragma once

#include <cmath>

#include "rldyn/autodiff.hpp"
#include "rldyn/networks.hpp"
#include "rldyn/toy.hpp"

namespace rldyn::testutil {

/// One SGD ascent step on the clipped single-sample surrogate, built through
/// the real autodiff stack: logits = [theta1 phi, theta2 phi] as a 1x2
/// trainable layer, log-softmax log-prob of action a1, clipped ratio
/// objective against pi_old. The independent route that toy_step must match.
inline toy::Theta autodiff_toy_step(const toy::Theta& theta, toy::ToyState state,
                                    const toy::ToyConfig& cfg, double phi_x) {
  const double phi_s = state == toy::ToyState::x ? phi_x : cfg.alpha * phi_x;
  const double pi_old = state == toy::ToyState::x ? cfg.pi_old_x : cfg.pi_old_y;
  const double advantage =
      state == toy::ToyState::x ? cfg.advantage_x : cfg.advantage_y;

  ad::NodePtr w = ad::leaf(Matrix::from_rows(1, 2, {theta.theta1, theta.theta2}));
  ad::ParameterSet params;
  params.add("W", w);

  ad::NodePtr logits = ad::linear(ad::constant(Matrix::from_rows(1, 1, {phi_s})), w,
                                  ad::constant(Matrix(1, 2)));
  ad::NodePtr log_prob = nets::categorical_log_prob_node(logits, {0});

  Matrix old_log_prob(1, 1);
  old_log_prob(0, 0) = std::log(pi_old);
  Matrix adv(1, 1);
  adv(0, 0) = advantage;
  ad::NodePtr objective = ad::reduce(
      ad::ppo_clip_surrogate(log_prob, old_log_prob, adv, cfg.clip_epsilon),
      ad::Reduce::sum);

  params.zero_gradients();
  ad::backward(objective);
  return {theta.theta1 + cfg.learning_rate * w->grad(0, 0),
          theta.theta2 + cfg.learning_rate * w->grad(0, 1)};
}

}  // namespace rldyn::testutil
