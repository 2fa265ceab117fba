#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rldyn::toy {

/// Two-state, two-action softmax policy over frozen 1-D features
/// phi(x) and phi(y) = alpha * phi(x), trained with clipped single-sample
/// policy-gradient SGD steps alternating between the two states.
struct ToyConfig {
  std::optional<double> phi_x;  // fixed feature; sampled from N(0,1) if unset
  std::uint64_t phi_seed = 7;   // seed for the sampled feature
  double alpha = 3.0;           // 3: overshoot regime, -1: interference regime
  double advantage_x = 1.0;
  double advantage_y = 1.0;
  double pi_old_x = 0.5;  // probabilities induced by theta = (0, 0)
  double pi_old_y = 0.5;
  double clip_epsilon = 0.1;
  double learning_rate = 1.5;
  std::size_t epochs_per_state = 10;
  std::size_t alternating_steps = 20;
  bool refresh_pi_old_each_block = false;  // optional; the analysis keeps pi_old fixed

  void validate() const;
  double resolved_phi_x() const;
};

enum class ToyState { x, y };

struct Theta {
  double theta1 = 0.0;
  double theta2 = 0.0;
};

struct ToyUpdate {
  std::size_t update_index = 0;
  ToyState state = ToyState::x;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double p_x = 0.0;  // pi_theta(a1 | x)
  double p_y = 0.0;  // pi_theta(a1 | y)
};

struct ToyTrace {
  ToyConfig config;
  double phi_x = 0.0;
  std::vector<ToyUpdate> updates;
};

/// pi_theta(a1 | s) for feature value phi_s, evaluated stably through the
/// logistic of (theta1 - theta2) * phi_s.
double toy_probability(const Theta& theta, double phi_s);

/// One SGD step on the clipped single-sample surrogate at state s:
///   delta = eta * (A_s / pi_old_s) * phi_s * p * (1 - p)
///   theta1 += delta, theta2 -= delta
/// applied only while the ratio p / pi_old_s is below 1 + epsilon; otherwise
/// the clipped gradient is zero and theta is unchanged.
Theta toy_step(const Theta& theta, ToyState state, const ToyConfig& cfg, double phi_x,
               double pi_old_x, double pi_old_y);

/// Alternating blocks of `epochs_per_state` updates on x then y, for
/// `alternating_steps` blocks, recording both probabilities after every
/// update.
ToyTrace toy_simulate(const ToyConfig& cfg);

struct ToyClaimReport {
  // Holds for every update and any alpha: the updated state's probability
  // never decreases.
  bool own_state_nondecreasing = true;
  // alpha >= 0: updates on either state never decrease the other's
  // probability.
  bool cross_state_nondecreasing = true;
  // alpha <= 0: updates on either state never increase the other's
  // probability.
  bool cross_state_nonincreasing = true;
  std::size_t updates_checked = 0;

  bool all_pass(double alpha) const {
    if (!own_state_nondecreasing) return false;
    if (alpha >= 0.0 && !cross_state_nondecreasing) return false;
    if (alpha <= 0.0 && !cross_state_nonincreasing) return false;
    return true;
  }
};

/// Machine-check of the per-update sign analysis for the trace's alpha.
ToyClaimReport toy_verify_claims(const ToyTrace& trace);

/// CSV with header update_index,state,theta1,theta2,p_x,p_y.
std::string toy_trace_csv(const ToyTrace& trace);

}  // namespace rldyn::toy
