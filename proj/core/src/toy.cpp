#include "rldyn/toy.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "rldyn/rng.hpp"

namespace rldyn::toy {

void ToyConfig::validate() const {
  if (!(advantage_x > 0.0 && advantage_y > 0.0)) {
    throw std::invalid_argument("ToyConfig: advantages must be > 0");
  }
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    throw std::invalid_argument("ToyConfig: clip_epsilon must be in (0,1)");
  }
  if (!(pi_old_x > 0.0 && pi_old_x < 1.0 && pi_old_y > 0.0 && pi_old_y < 1.0)) {
    throw std::invalid_argument("ToyConfig: pi_old values must be in (0,1)");
  }
  if (epochs_per_state == 0 || alternating_steps == 0) {
    throw std::invalid_argument("ToyConfig: epochs and steps must be > 0");
  }
}

double ToyConfig::resolved_phi_x() const {
  if (phi_x.has_value()) return *phi_x;
  Rng rng = Rng::derive(phi_seed, "toy_phi");
  return rng.normal();
}

double toy_probability(const Theta& theta, double phi_s) {
  // softmax over two logits depends on theta only through (theta1-theta2)*phi.
  const double z = (theta.theta1 - theta.theta2) * phi_s;
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Theta toy_step(const Theta& theta, ToyState state, const ToyConfig& cfg, double phi_x,
               double pi_old_x, double pi_old_y) {
  const double phi_s = state == ToyState::x ? phi_x : cfg.alpha * phi_x;
  const double pi_old = state == ToyState::x ? pi_old_x : pi_old_y;
  const double advantage = state == ToyState::x ? cfg.advantage_x : cfg.advantage_y;

  const double p = toy_probability(theta, phi_s);
  if (p / pi_old >= 1.0 + cfg.clip_epsilon) return theta;  // clipped: zero gradient

  // e^{t1 phi} e^{t2 phi} / (e^{t1 phi} + e^{t2 phi})^2 == p (1 - p).
  const double delta =
      cfg.learning_rate * (advantage / pi_old) * phi_s * p * (1.0 - p);
  return {theta.theta1 + delta, theta.theta2 - delta};
}

ToyTrace toy_simulate(const ToyConfig& cfg) {
  cfg.validate();
  ToyTrace trace;
  trace.config = cfg;
  trace.phi_x = cfg.resolved_phi_x();

  Theta theta;
  double pi_old_x = cfg.pi_old_x;
  double pi_old_y = cfg.pi_old_y;
  std::size_t index = 0;
  for (std::size_t block = 0; block < cfg.alternating_steps; ++block) {
    const ToyState state = block % 2 == 0 ? ToyState::x : ToyState::y;
    if (cfg.refresh_pi_old_each_block) {
      pi_old_x = toy_probability(theta, trace.phi_x);
      pi_old_y = toy_probability(theta, cfg.alpha * trace.phi_x);
    }
    for (std::size_t e = 0; e < cfg.epochs_per_state; ++e) {
      theta = toy_step(theta, state, cfg, trace.phi_x, pi_old_x, pi_old_y);
      ToyUpdate u;
      u.update_index = index++;
      u.state = state;
      u.theta1 = theta.theta1;
      u.theta2 = theta.theta2;
      u.p_x = toy_probability(theta, trace.phi_x);
      u.p_y = toy_probability(theta, cfg.alpha * trace.phi_x);
      trace.updates.push_back(u);
    }
  }
  return trace;
}

ToyClaimReport toy_verify_claims(const ToyTrace& trace) {
  ToyClaimReport report;
  double prev_px = toy_probability(Theta{}, trace.phi_x);
  double prev_py = toy_probability(Theta{}, trace.config.alpha * trace.phi_x);
  for (const ToyUpdate& u : trace.updates) {
    const double own_prev = u.state == ToyState::x ? prev_px : prev_py;
    const double own_now = u.state == ToyState::x ? u.p_x : u.p_y;
    const double other_prev = u.state == ToyState::x ? prev_py : prev_px;
    const double other_now = u.state == ToyState::x ? u.p_y : u.p_x;

    if (own_now < own_prev) report.own_state_nondecreasing = false;
    if (other_now < other_prev) report.cross_state_nondecreasing = false;
    if (other_now > other_prev) report.cross_state_nonincreasing = false;

    prev_px = u.p_x;
    prev_py = u.p_y;
    ++report.updates_checked;
  }
  return report;
}

std::string toy_trace_csv(const ToyTrace& trace) {
  std::string out = "update_index,state,theta1,theta2,p_x,p_y\n";
  char line[192];
  for (const ToyUpdate& u : trace.updates) {
    std::snprintf(line, sizeof line, "%zu,%s,%.17g,%.17g,%.17g,%.17g\n",
                  u.update_index, u.state == ToyState::x ? "x" : "y", u.theta1,
                  u.theta2, u.p_x, u.p_y);
    out += line;
  }
  return out;
}

}  // namespace rldyn::toy
