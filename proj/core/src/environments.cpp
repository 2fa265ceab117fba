#include "rldyn/environments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rldyn::envs {

void EnvConfig::validate() const {
  if (horizon == 0) throw std::invalid_argument("EnvConfig: horizon must be > 0");
  if (!(sticky_action_prob >= 0.0 && sticky_action_prob < 1.0)) {
    throw std::invalid_argument("EnvConfig: sticky_action_prob must be in [0,1)");
  }
  if (!(reward_mask_prob >= 0.0 && reward_mask_prob < 1.0)) {
    throw std::invalid_argument("EnvConfig: reward_mask_prob must be in [0,1)");
  }
}

EnvConfig EnvConfig::defaults_for(EnvKind kind, std::uint64_t seed) {
  EnvConfig cfg;
  cfg.kind = kind;
  cfg.seed = seed;
  switch (kind) {
    case EnvKind::chain_dense:
      cfg.horizon = 64;
      cfg.sticky_action_prob = 0.25;
      cfg.reward_mask_prob = 0.0;
      break;
    case EnvKind::chain_sparse_masked:
      cfg.horizon = 64;
      cfg.sticky_action_prob = 0.25;
      cfg.reward_mask_prob = 0.9;
      break;
    case EnvKind::point_mass:
      cfg.horizon = 128;
      cfg.sticky_action_prob = 0.0;
      cfg.reward_mask_prob = 0.0;
      break;
  }
  return cfg;
}

double apply_reward_mask(double reward, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("apply_reward_mask: p must be in [0,1)");
  }
  if (p == 0.0) return reward;
  return rng.uniform() < p ? 0.0 : reward;
}

std::size_t chain_next_cell(std::size_t cell, std::size_t action) {
  const std::size_t row = cell / kChainCols;
  const std::size_t col = cell % kChainCols;
  std::size_t nr = row, nc = col;
  switch (action) {
    case 0:
      if (row > 0) nr = row - 1;
      break;
    case 1:
      if (col + 1 < kChainCols) nc = col + 1;
      break;
    case 2:
      if (row + 1 < kChainRows) nr = row + 1;
      break;
    case 3:
      if (col > 0) nc = col - 1;
      break;
    default:
      throw std::invalid_argument("chain action must be in [0,4)");
  }
  return nr * kChainCols + nc;
}

double chain_distance_to_goal(std::size_t cell) {
  const std::size_t row = cell / kChainCols;
  const std::size_t col = cell % kChainCols;
  const std::size_t grow = kChainGoalCell / kChainCols;
  const std::size_t gcol = kChainGoalCell % kChainCols;
  const double dr = row > grow ? row - grow : grow - row;
  const double dc = col > gcol ? col - gcol : gcol - col;
  return dr + dc;
}

double chain_reward(std::size_t cell, std::size_t next) {
  double r = kChainStepRewardScale *
             (chain_distance_to_goal(cell) - chain_distance_to_goal(next));
  if (next == kChainGoalCell) r += kChainGoalBonus;
  return r;
}

namespace {

class ChainEnv final : public Environment {
 public:
  explicit ChainEnv(const EnvConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
  }

  std::vector<double> reset(std::uint64_t seed) override {
    rng_ = Rng::derive(seed, "chain_env");
    cell_ = kChainStartCell;
    t_ = 0;
    prev_action_ = kChainActions;  // sentinel: no previous action yet
    done_ = false;
    return observation();
  }

  StepResult step(const std::vector<double>& action) override {
    if (done_) throw std::logic_error("ChainEnv::step after episode end");
    if (action.size() != 1) {
      throw std::invalid_argument("ChainEnv: action must be a single index");
    }
    auto chosen = static_cast<std::size_t>(action[0]);
    if (chosen >= kChainActions) throw std::invalid_argument("ChainEnv: action out of range");

    std::size_t executed = chosen;
    if (prev_action_ < kChainActions && cfg_.sticky_action_prob > 0.0 &&
        rng_.uniform() < cfg_.sticky_action_prob) {
      executed = prev_action_;
    }
    prev_action_ = executed;

    const std::size_t next = chain_next_cell(cell_, executed);
    double reward = chain_reward(cell_, next);
    if (cfg_.reward_mask_prob > 0.0) {
      reward = apply_reward_mask(reward, cfg_.reward_mask_prob, rng_);
    }
    cell_ = next;
    ++t_;

    StepResult res;
    res.reward = reward;
    res.terminated = cell_ == kChainGoalCell;
    res.truncated = !res.terminated && t_ >= cfg_.horizon;
    done_ = res.terminated || res.truncated;
    res.observation = observation();
    return res;
  }

  std::size_t observation_dim() const override { return kChainCells + 1; }
  bool discrete_actions() const override { return true; }
  std::size_t action_count() const override { return kChainActions; }
  std::size_t action_dim() const override { return 1; }
  const EnvConfig& config() const override { return cfg_; }

 private:
  std::vector<double> observation() const {
    std::vector<double> obs(kChainCells + 1, 0.0);
    obs[cell_] = 1.0;
    obs[kChainCells] = static_cast<double>(t_) / static_cast<double>(cfg_.horizon);
    return obs;
  }

  EnvConfig cfg_;
  Rng rng_;
  std::size_t cell_ = kChainStartCell;
  std::size_t t_ = 0;
  std::size_t prev_action_ = kChainActions;
  bool done_ = true;
};

class PointMassEnv final : public Environment {
 public:
  explicit PointMassEnv(const EnvConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
  }

  std::vector<double> reset(std::uint64_t seed) override {
    rng_ = Rng::derive(seed, "point_mass_env");
    x_ = 2.0 * rng_.uniform() - 1.0;
    y_ = 2.0 * rng_.uniform() - 1.0;
    t_ = 0;
    done_ = false;
    return observation();
  }

  StepResult step(const std::vector<double>& action) override {
    if (done_) throw std::logic_error("PointMassEnv::step after episode end");
    if (action.size() != 2) {
      throw std::invalid_argument("PointMassEnv: action must be 2-dimensional");
    }
    const double ax = std::clamp(action[0], -1.0, 1.0);
    const double ay = std::clamp(action[1], -1.0, 1.0);
    x_ = std::clamp(x_ + kPointMassActionScale * ax, -1.0, 1.0);
    y_ = std::clamp(y_ + kPointMassActionScale * ay, -1.0, 1.0);
    ++t_;

    StepResult res;
    res.reward = -(x_ * x_ + y_ * y_);
    res.terminated = false;
    res.truncated = t_ >= cfg_.horizon;
    done_ = res.truncated;
    res.observation = observation();
    return res;
  }

  std::size_t observation_dim() const override { return 3; }
  bool discrete_actions() const override { return false; }
  std::size_t action_count() const override { return 0; }
  std::size_t action_dim() const override { return 2; }
  const EnvConfig& config() const override { return cfg_; }

 private:
  std::vector<double> observation() const {
    return {x_, y_, static_cast<double>(t_) / static_cast<double>(cfg_.horizon)};
  }

  EnvConfig cfg_;
  Rng rng_;
  double x_ = 0.0, y_ = 0.0;
  std::size_t t_ = 0;
  bool done_ = true;
};

}  // namespace

std::unique_ptr<Environment> make_environment(const EnvConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case EnvKind::chain_dense:
    case EnvKind::chain_sparse_masked:
      return std::make_unique<ChainEnv>(cfg);
    case EnvKind::point_mass:
      return std::make_unique<PointMassEnv>(cfg);
  }
  throw std::invalid_argument("make_environment: unknown kind");
}

Normalizer Normalizer::fit(const Matrix& observations, std::size_t episodes,
                           std::size_t min_episodes) {
  if (observations.rows == 0) {
    throw std::invalid_argument("Normalizer::fit: empty rollout");
  }
  if (episodes < min_episodes) {
    throw std::invalid_argument("Normalizer::fit: rollout covers " +
                                std::to_string(episodes) + " episodes, need >= " +
                                std::to_string(min_episodes));
  }
  const std::size_t dims = observations.cols;
  const double n = static_cast<double>(observations.rows);
  Normalizer norm;
  norm.mean_.assign(dims, 0.0);
  norm.std_.assign(dims, 0.0);
  for (std::size_t i = 0; i < observations.rows; ++i)
    for (std::size_t j = 0; j < dims; ++j) norm.mean_[j] += observations(i, j);
  for (double& m : norm.mean_) m /= n;
  for (std::size_t i = 0; i < observations.rows; ++i)
    for (std::size_t j = 0; j < dims; ++j) {
      const double d = observations(i, j) - norm.mean_[j];
      norm.std_[j] += d * d;
    }
  for (double& s : norm.std_) s = std::max(std::sqrt(s / n), 1e-8);
  return norm;
}

std::vector<double> Normalizer::apply(const std::vector<double>& observation) const {
  if (!fitted()) throw std::logic_error("Normalizer::apply before fit");
  if (observation.size() != mean_.size()) {
    throw std::invalid_argument("Normalizer::apply: observation has " +
                                std::to_string(observation.size()) +
                                " dims, normalizer was fit on " +
                                std::to_string(mean_.size()));
  }
  std::vector<double> out(observation.size());
  // Trailing time feature is passed through untouched.
  const std::size_t last = observation.size() - 1;
  for (std::size_t j = 0; j < last; ++j) out[j] = (observation[j] - mean_[j]) / std_[j];
  out[last] = observation[last];
  return out;
}

Matrix Normalizer::apply(const Matrix& observations) const {
  Matrix out(observations.rows, observations.cols);
  std::vector<double> row(observations.cols);
  for (std::size_t i = 0; i < observations.rows; ++i) {
    for (std::size_t j = 0; j < observations.cols; ++j) row[j] = observations(i, j);
    std::vector<double> n = apply(row);
    for (std::size_t j = 0; j < observations.cols; ++j) out(i, j) = n[j];
  }
  return out;
}

}  // namespace rldyn::envs
