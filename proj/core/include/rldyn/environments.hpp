#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rldyn/matrix.hpp"
#include "rldyn/rng.hpp"

namespace rldyn::envs {

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool terminated = false;  // reached a terminal state of the MDP
  bool truncated = false;   // hit the episode horizon t_max
};

enum class EnvKind { chain_dense, chain_sparse_masked, point_mass };

struct EnvConfig {
  EnvKind kind = EnvKind::chain_dense;
  std::size_t horizon = 64;        // t_max
  double sticky_action_prob = 0.25;
  double reward_mask_prob = 0.0;   // chain_sparse_masked sets 0.9 by default
  std::uint64_t seed = 0;

  void validate() const;
  static EnvConfig defaults_for(EnvKind kind, std::uint64_t seed);
};

/// Zero the reward with probability p, pass it through otherwise.
double apply_reward_mask(double reward, double p, Rng& rng);

/// Finite-horizon environment. Observations always end with the normalized
/// time feature t / t_max.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  virtual StepResult step(const std::vector<double>& action) = 0;

  virtual std::size_t observation_dim() const = 0;
  virtual bool discrete_actions() const = 0;
  virtual std::size_t action_count() const = 0;  // discrete: number of actions
  virtual std::size_t action_dim() const = 0;    // continuous: action vector size
  virtual const EnvConfig& config() const = 0;
};

std::unique_ptr<Environment> make_environment(const EnvConfig& cfg);

// Grid layout of the chain environments, exposed so test oracles can do
// exact dynamic programming against the same constants.
inline constexpr std::size_t kChainRows = 4;
inline constexpr std::size_t kChainCols = 6;
inline constexpr std::size_t kChainCells = kChainRows * kChainCols;
inline constexpr std::size_t kChainActions = 4;  // up, right, down, left
inline constexpr std::size_t kChainStartCell = 0;
inline constexpr std::size_t kChainGoalCell = kChainCells - 1;
inline constexpr double kChainStepRewardScale = 0.125;  // 1 / max Manhattan distance
inline constexpr double kChainGoalBonus = 1.0;

/// Deterministic single-step chain dynamics (no stickiness, no masking):
/// returns the next cell for an executed action, staying in place on walls.
std::size_t chain_next_cell(std::size_t cell, std::size_t action);
/// Manhattan distance from a cell to the goal.
double chain_distance_to_goal(std::size_t cell);
/// Shaped reward for moving from `cell` to `next`, including the goal bonus.
double chain_reward(std::size_t cell, std::size_t next);

// Point-mass constants.
inline constexpr double kPointMassActionScale = 0.15;

/// Frozen per-dimension standardization fitted once on an initial uniform
/// rollout. The trailing time feature is left untouched.
class Normalizer {
 public:
  Normalizer() = default;

  /// Fit on a stack of observations (rows). `episodes` is the number of
  /// completed episodes the rollout covers; fewer than `min_episodes` is an
  /// error, matching the fitting protocol.
  static Normalizer fit(const Matrix& observations, std::size_t episodes,
                        std::size_t min_episodes = 4);

  std::vector<double> apply(const std::vector<double>& observation) const;
  Matrix apply(const Matrix& observations) const;

  bool fitted() const { return !mean_.empty(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return std_; }

 private:
  std::vector<double> mean_;
  std::vector<double> std_;  // floored at 1e-8
};

}  // namespace rldyn::envs
