#include <cmath>
#include <sstream>
#include <stdexcept>

#include <doctest.h>

#include "rldyn/toy.hpp"
#include "support/toy_autodiff.hpp"

using namespace rldyn;
using namespace rldyn::toy;
using rldyn::testutil::autodiff_toy_step;

namespace {

ToyConfig table_defaults(double alpha) {
  ToyConfig cfg;
  cfg.alpha = alpha;
  return cfg;  // eta 1.5, eps 0.1, advantages 1, 10 epochs, 20 blocks
}

}  // namespace

TEST_CASE("toy_step: hand-computed first update") {
  ToyConfig cfg = table_defaults(1.0);
  Theta theta = toy_step(Theta{0.0, 0.0}, ToyState::x, cfg, /*phi_x=*/1.0, 0.5, 0.5);
  // delta = 1.5 * (1 / 0.5) * (1 * e^0 e^0 / 4) = 0.75
  CHECK(theta.theta1 == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(theta.theta2 == doctest::Approx(-0.75).epsilon(1e-15));
}

TEST_CASE("toy_step: clip gate and zero feature are no-ops") {
  ToyConfig cfg = table_defaults(1.0);
  // p(a1|x) = sigmoid(2 * 1.0) ~ 0.88 > 0.55 = pi_old (1 + eps): gate closed.
  Theta start{1.0, -1.0};
  Theta after = toy_step(start, ToyState::x, cfg, 1.0, 0.5, 0.5);
  CHECK(after.theta1 == start.theta1);
  CHECK(after.theta2 == start.theta2);

  Theta z = toy_step(Theta{0.2, -0.2}, ToyState::x, cfg, 0.0, 0.5, 0.5);
  CHECK(z.theta1 == 0.2);
  CHECK(z.theta2 == -0.2);
}

TEST_CASE("toy_simulate: alpha = 1 makes both probability curves identical") {
  ToyConfig cfg = table_defaults(1.0);
  cfg.phi_x = 0.8;
  ToyTrace trace = toy_simulate(cfg);
  REQUIRE(trace.updates.size() == cfg.epochs_per_state * cfg.alternating_steps);
  for (const ToyUpdate& u : trace.updates) CHECK(u.p_x == u.p_y);
}

TEST_CASE("toy_simulate: overshoot regime (alpha = 3, Fig. 5 left layout)") {
  ToyConfig cfg = table_defaults(3.0);
  ToyTrace trace = toy_simulate(cfg);

  double prev_px = 0.5, prev_py = 0.5;
  for (const ToyUpdate& u : trace.updates) {
    CHECK(u.p_x >= prev_px);
    CHECK(u.p_y >= prev_py);
    prev_px = u.p_x;
    prev_py = u.p_y;
  }
  // At least one probability is pushed past its own clip threshold by the
  // other state's updates.
  const double threshold = 0.5 * (1.0 + cfg.clip_epsilon);
  CHECK(std::max(prev_px, prev_py) > threshold);

  ToyClaimReport report = toy_verify_claims(trace);
  CHECK(report.all_pass(cfg.alpha));
  CHECK(report.updates_checked == trace.updates.size());
}

TEST_CASE("toy_simulate: interference regime (alpha = -1, Fig. 5 right layout)") {
  ToyConfig cfg = table_defaults(-1.0);
  ToyTrace trace = toy_simulate(cfg);

  // Each state's own update never decreases it; the other state's update
  // never increases it.
  ToyClaimReport report = toy_verify_claims(trace);
  CHECK(report.own_state_nondecreasing);
  CHECK(report.cross_state_nonincreasing);
  CHECK(report.all_pass(cfg.alpha));

  // One of the probabilities ends strictly below its initial value.
  const ToyUpdate& last = trace.updates.back();
  CHECK(std::min(last.p_x, last.p_y) < 0.5);
}

TEST_CASE("toy_simulate: alpha = 0 pins the other state at one half") {
  ToyConfig cfg = table_defaults(0.0);
  ToyTrace trace = toy_simulate(cfg);
  for (const ToyUpdate& u : trace.updates) CHECK(u.p_y == 0.5);
  CHECK(toy_verify_claims(trace).all_pass(0.0));
}

TEST_CASE("theta1 + theta2 is conserved exactly") {
  for (double alpha : {3.0, -1.0, 0.4}) {
    ToyConfig cfg = table_defaults(alpha);
    ToyTrace trace = toy_simulate(cfg);
    for (const ToyUpdate& u : trace.updates) CHECK(u.theta1 + u.theta2 == 0.0);
  }
}

TEST_CASE("probability depends on theta only through (theta1 - theta2) * phi") {
  Rng rng(61);
  for (int i = 0; i < 50; ++i) {
    const double a = rng.normal(), b = rng.normal(), c = rng.normal();
    const double phi = rng.normal();
    const double p1 = toy_probability(Theta{a, b}, phi);
    const double p2 = toy_probability(Theta{a + c, b + c}, phi);
    CHECK(p1 == doctest::Approx(p2).epsilon(1e-12));
  }
}

TEST_CASE("analytic update equals an autodiff SGD step on the clipped surrogate") {
  Rng rng(88);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    ToyConfig cfg;
    cfg.alpha = rng.normal();
    cfg.advantage_x = 0.5 + 1.5 * rng.uniform();
    cfg.advantage_y = 0.5 + 1.5 * rng.uniform();
    cfg.pi_old_x = 0.1 + 0.8 * rng.uniform();
    cfg.pi_old_y = 0.1 + 0.8 * rng.uniform();
    const double phi = rng.normal();
    Theta theta{rng.normal(), rng.normal()};
    ToyState state = rng.uniform() < 0.5 ? ToyState::x : ToyState::y;

    Theta analytic = toy_step(theta, state, cfg, phi, cfg.pi_old_x, cfg.pi_old_y);
    Theta graph = autodiff_toy_step(theta, state, cfg, phi);
    worst = std::max(worst, std::abs(analytic.theta1 - graph.theta1));
    worst = std::max(worst, std::abs(analytic.theta2 - graph.theta2));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("refresh option and config validation") {
  ToyConfig cfg = table_defaults(3.0);
  cfg.refresh_pi_old_each_block = true;
  ToyTrace trace = toy_simulate(cfg);  // refreshing reopens the clip gate
  ToyTrace fixed = toy_simulate(table_defaults(3.0));
  CHECK(trace.updates.back().p_x >= fixed.updates.back().p_x - 1e-12);

  ToyConfig bad = table_defaults(1.0);
  bad.advantage_x = -1.0;
  CHECK_THROWS_AS(toy_simulate(bad), std::invalid_argument);
  ToyConfig bad2 = table_defaults(1.0);
  bad2.clip_epsilon = 1.5;
  CHECK_THROWS_AS(toy_simulate(bad2), std::invalid_argument);
}

TEST_CASE("CSV trace: header, rows, and round-trip of the first line") {
  ToyConfig cfg = table_defaults(3.0);
  cfg.phi_x = 1.0;
  ToyTrace trace = toy_simulate(cfg);
  std::string csv = toy_trace_csv(trace);

  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "update_index,state,theta1,theta2,p_x,p_y");

  std::size_t rows = 0;
  std::string first;
  while (std::getline(in, line)) {
    if (rows == 0) first = line;
    ++rows;
  }
  CHECK(rows == trace.updates.size());

  std::size_t idx;
  char state;
  double t1, t2, px, py;
  REQUIRE(std::sscanf(first.c_str(), "%zu,%c,%lf,%lf,%lf,%lf", &idx, &state, &t1,
                      &t2, &px, &py) == 6);
  CHECK(idx == 0);
  CHECK(state == 'x');
  CHECK(t1 == trace.updates[0].theta1);
  CHECK(px == trace.updates[0].p_x);
}
