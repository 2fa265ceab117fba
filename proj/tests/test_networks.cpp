#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <doctest.h>

#include "rldyn/networks.hpp"
#include "support/test_util.hpp"

using namespace rldyn;
using namespace rldyn::nets;
using rldyn::testutil::random_matrix;

namespace {

MlpSpec actor_spec(std::size_t in = 6, std::size_t actions = 4) {
  MlpSpec spec;
  spec.input_dim = in;
  spec.hidden_widths = {16, 16};
  spec.activation = ad::Activation::relu;
  spec.head = HeadKind::categorical;
  spec.head_dim = actions;
  return spec;
}

MlpSpec critic_spec(std::size_t in = 6) {
  MlpSpec spec = actor_spec(in);
  spec.head = HeadKind::value;
  spec.head_dim = 1;
  return spec;
}

}  // namespace

TEST_CASE("init_mlp: deterministic per seed, zero biases") {
  NetworkParams a = init_mlp(actor_spec(), 42);
  NetworkParams b = init_mlp(actor_spec(), 42);
  NetworkParams c = init_mlp(actor_spec(), 43);

  for (std::size_t l = 0; l < a.hidden_w.size(); ++l) {
    CHECK(a.hidden_w[l]->value.data == b.hidden_w[l]->value.data);
    for (double bias : a.hidden_b[l]->value.data) CHECK(bias == 0.0);
  }
  CHECK(a.out_w->value.data == b.out_w->value.data);
  CHECK(a.out_w->value.data != c.out_w->value.data);
}

TEST_CASE("init_mlp: orthogonal columns with gain sqrt(2) on square hidden layers") {
  NetworkParams net = init_mlp(actor_spec(), 5);  // 16x16 second hidden layer
  const Matrix& w = net.hidden_w[1]->value;
  REQUIRE(w.rows == w.cols);
  Matrix wtw = matmul(transpose(w), w);
  for (std::size_t i = 0; i < wtw.rows; ++i) {
    for (std::size_t j = 0; j < wtw.cols; ++j) {
      const double expected = i == j ? 2.0 : 0.0;
      CHECK(std::abs(wtw(i, j) - expected) < 1e-6);
    }
  }
}

TEST_CASE("actor_forward: constant-bias head when the output weights are zero") {
  NetworkParams net = init_mlp(actor_spec(), 1);
  for (double& v : net.out_w->value.data) v = 0.0;
  net.out_b->value = Matrix::from_rows(1, 4, {0.3, -0.1, 0.0, 2.0});

  Rng rng(3);
  Matrix obs = random_matrix(5, 6, rng);
  auto [dist, probe] = actor_forward(net, obs);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(dist.logits(i, 0) == 0.3);
    CHECK(dist.logits(i, 1) == -0.1);
    CHECK(dist.logits(i, 2) == 0.0);
    CHECK(dist.logits(i, 3) == 2.0);
  }

  // Probe consistency: activations are exactly the activation of the
  // pre-activations.
  for (std::size_t l = 0; l < probe.pre_activations.size(); ++l) {
    const Matrix& pre = probe.pre_activations[l];
    const Matrix& act = probe.activations[l];
    for (std::size_t i = 0; i < pre.size(); ++i) {
      CHECK(act.data[i] == (pre.data[i] > 0.0 ? pre.data[i] : 0.0));
    }
  }
}

TEST_CASE("forward: non-finite observations rejected") {
  NetworkParams net = init_mlp(actor_spec(), 1);
  Matrix obs(1, 6);
  obs(0, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(actor_forward(net, obs), std::invalid_argument);
}

TEST_CASE("forward: batched rows equal single-row forwards bitwise") {
  NetworkParams net = init_mlp(actor_spec(), 9);
  Rng rng(17);
  Matrix obs = random_matrix(32, 6, rng);
  auto [dist_batch, probe_batch] = actor_forward(net, obs);

  for (std::size_t i = 0; i < 32; i += 7) {
    Matrix row(1, 6);
    for (std::size_t j = 0; j < 6; ++j) row(0, j) = obs(i, j);
    auto [dist_row, probe_row] = actor_forward(net, row);
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(dist_row.logits(0, j) == dist_batch.logits(i, j));
    }
  }
}

TEST_CASE("critic_forward: zero weights with bias 0.5, probe shapes") {
  NetworkParams net = init_mlp(critic_spec(), 2);
  for (double& v : net.out_w->value.data) v = 0.0;
  net.out_b->value(0, 0) = 0.5;

  Rng rng(5);
  Matrix obs = random_matrix(7, 6, rng);
  auto [values, probe] = critic_forward(net, obs);
  for (double v : values) CHECK(v == 0.5);

  REQUIRE(probe.pre_activations.size() == 2);
  CHECK(probe.pre_activations[0].rows == 7);
  CHECK(probe.pre_activations[0].cols == 16);
  CHECK(probe.features().cols == 16);
}

TEST_CASE("categorical sampling: entropy values and limiting case") {
  Rng rng(23);
  Matrix uniform(3, 4, 0.0);
  auto s = categorical_sample_logprob_entropy(uniform, rng);
  for (double h : s.entropy) CHECK(h == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  Matrix dominant = Matrix::from_rows(1, 3, {50.0, 0.0, 0.0});
  for (int i = 0; i < 20; ++i) {
    auto d = categorical_sample_logprob_entropy(dominant, rng);
    CHECK(d.actions[0] == 0);
    CHECK(d.entropy[0] < 1e-12);
  }
}

TEST_CASE("categorical sampling: Monte Carlo frequencies within 3-sigma") {
  const std::vector<double> probs = {0.1, 0.2, 0.3, 0.4};
  Matrix logits(1, 4);
  for (std::size_t j = 0; j < 4; ++j) logits(0, j) = std::log(probs[j]);

  const std::size_t n = 100'000;
  std::vector<std::size_t> counts(4, 0);
  Rng rng(1234);
  for (std::size_t i = 0; i < n; ++i) {
    auto s = categorical_sample_logprob_entropy(logits, rng);
    ++counts[s.actions[0]];
  }
  for (std::size_t j = 0; j < 4; ++j) {
    const double freq = static_cast<double>(counts[j]) / static_cast<double>(n);
    const double sigma = std::sqrt(probs[j] * (1.0 - probs[j]) / static_cast<double>(n));
    CHECK(std::abs(freq - probs[j]) <= 3.0 * sigma);
  }
}

TEST_CASE("tanhnormal: sampling behavior and log-prob determinism") {
  Rng rng(31);
  Matrix mean(4, 2, 0.0);
  Matrix sd(4, 2, 1e-4);
  auto s = tanhnormal_sample_logprob(mean, sd, rng);
  for (double a : s.actions.data) {
    CHECK(std::abs(a) < 0.01);
    CHECK(a > -1.0);
    CHECK(a < 1.0);
  }
  for (double lp : s.log_probs) CHECK(std::isfinite(lp));

  // Recomputation from the stored pre-squash sample is identical.
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(tanhnormal_log_prob(mean, sd, s.pre_squash, i) == s.log_probs[i]);
  }

  Matrix bad_sd(4, 2, 0.0);
  CHECK_THROWS_AS(tanhnormal_sample_logprob(mean, bad_sd, rng), std::invalid_argument);
}

TEST_CASE("tanhnormal: density integrates to 1 over the squashed support") {
  // Quadrature in u-space: integral of exp(log_prob(tanh u)) * da/du.
  Matrix mean(1, 1, 0.0);
  Matrix sd(1, 1, 1.0);
  const double h = 1e-3;
  double integral = 0.0;
  Matrix u(1, 1);
  auto density_at = [&](double uu) {
    u(0, 0) = uu;
    const double t = std::tanh(uu);
    return std::exp(tanhnormal_log_prob(mean, sd, u, 0)) * (1.0 - t * t);
  };
  for (double x = -8.0; x < 8.0; x += h) {
    integral += 0.5 * h * (density_at(x) + density_at(x + h));
  }
  CHECK(std::abs(integral - 1.0) < 1e-3);
}

TEST_CASE("tanhnormal: log-prob stays finite in degenerate corners") {
  Rng rng(77);
  Matrix mean = Matrix::from_rows(2, 2, {50.0, -50.0, 0.0, 30.0});
  Matrix sd = Matrix::from_rows(2, 2, {1e-6, 40.0, 5.0, 1e-5});
  auto s = tanhnormal_sample_logprob(mean, sd, rng);
  for (double lp : s.log_probs) {
    CHECK(std::isfinite(lp));
  }
}

TEST_CASE("collapsed feature layer: identical action distribution in every state") {
  NetworkParams net = init_mlp(actor_spec(), 4);
  // Kill the penultimate layer: zero weights, negative bias, ReLU.
  for (double& v : net.hidden_w[1]->value.data) v = 0.0;
  for (double& v : net.hidden_b[1]->value.data) v = -1.0;

  Rng rng(8);
  Matrix obs = random_matrix(16, 6, rng);
  auto [dist, probe] = actor_forward(net, obs);

  for (double a : probe.features().data) CHECK(a == 0.0);
  for (std::size_t i = 1; i < 16; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(dist.logits(i, j) == dist.logits(0, j));
    }
  }
}

TEST_CASE("shared trunk: bit-identical penultimate activations") {
  NetworkParams actor = init_mlp(actor_spec(), 12);
  NetworkParams critic = make_shared_trunk_critic(actor, 13);

  Rng rng(21);
  Matrix obs = random_matrix(10, 6, rng);
  auto [dist, actor_probe] = actor_forward(actor, obs);
  auto [values, critic_probe] = critic_forward(critic, obs);
  CHECK(actor_probe.features().data == critic_probe.features().data);

  // Registering both in one set must not duplicate trunk parameters.
  ad::ParameterSet params;
  actor.register_in(params, "actor");
  critic.register_in(params, "critic");
  CHECK(params.count() == 2 * 2 + 2 + 2);  // trunk W/b x2 + two heads
}

TEST_CASE("checkpoint: round-trip is bit-exact") {
  NetworkParams actor = init_mlp(actor_spec(), 100);
  NetworkParams critic = init_mlp(critic_spec(), 101);

  const std::string path = "test_checkpoint_roundtrip.bin";
  save_agent_checkpoint(path, actor, critic, false);
  AgentCheckpoint loaded = load_agent_checkpoint(path);

  CHECK(loaded.shared_trunk == false);
  CHECK(loaded.actor.spec.hidden_widths == actor.spec.hidden_widths);
  for (std::size_t l = 0; l < actor.hidden_w.size(); ++l) {
    CHECK(loaded.actor.hidden_w[l]->value.data == actor.hidden_w[l]->value.data);
    CHECK(loaded.actor.hidden_b[l]->value.data == actor.hidden_b[l]->value.data);
  }
  CHECK(loaded.actor.out_w->value.data == actor.out_w->value.data);
  CHECK(loaded.critic.out_w->value.data == critic.out_w->value.data);

  // Second save of the loaded agent produces identical bytes.
  const std::string path2 = "test_checkpoint_roundtrip2.bin";
  save_agent_checkpoint(path2, loaded.actor, loaded.critic, loaded.shared_trunk);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("checkpoint: shared trunk aliasing survives a round-trip") {
  NetworkParams actor = init_mlp(actor_spec(), 55);
  NetworkParams critic = make_shared_trunk_critic(actor, 56);
  const std::string path = "test_checkpoint_shared.bin";
  save_agent_checkpoint(path, actor, critic, true);
  AgentCheckpoint loaded = load_agent_checkpoint(path);
  CHECK(loaded.shared_trunk);
  CHECK(loaded.critic.hidden_w[0] == loaded.actor.hidden_w[0]);  // same node
  std::filesystem::remove(path);
}
