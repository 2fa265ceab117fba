#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "rldyn/advantage.hpp"
#include "rldyn/autodiff.hpp"
#include "rldyn/diagnostics.hpp"
#include "rldyn/environments.hpp"
#include "rldyn/networks.hpp"
#include "rldyn/optim.hpp"

namespace rldyn::ppo {

enum class PfoScope { off, last, all };

struct PpoConfig {
  double clip_epsilon = 0.1;
  std::size_t epochs = 4;            // K
  std::size_t minibatch_size = 256;  // M, last partial minibatch dropped
  double entropy_coeff = 0.01;       // c_H
  double value_coeff = 0.5;          // c_VF
  double pfo_coeff = 1.0;            // c_PFO
  PfoScope pfo_scope = PfoScope::off;
  optim::AdamConfig adam;
  double max_grad_norm = 0.5;
  bool adam_reset_each_batch = false;
  bool shared_trunk = false;
  gae::GaeConfig gae;

  void validate(std::size_t batch_size) const;
};

/// One on-policy batch of B = num_envs * steps_per_env transitions,
/// flattened env-major (all steps of env 0, then env 1, ...). Everything an
/// optimization phase and the diagnostics need is snapshotted here; nothing
/// in it changes during the K epochs.
struct RolloutBatch {
  std::size_t size = 0;
  std::size_t num_envs = 0;
  std::size_t steps_per_env = 0;
  bool continuous = false;

  Matrix observations;  // B x obs_dim, in the network input space

  std::vector<std::size_t> actions;  // discrete actions
  Matrix pre_squash;                 // continuous: B x K, the pre-tanh samples

  Matrix old_log_probs;       // B x 1, computed through the training code path
  nets::DistParams old_dist;  // stacked head outputs at collection time

  nets::FeatureProbe actor_probe;   // all hidden layers at collection time
  nets::FeatureProbe critic_probe;

  std::vector<double> rewards;    // raw environment rewards
  std::vector<bool> terminated;   // recursion resets for GAE (includes folded
                                  // mid-batch truncations)
  std::vector<double> values;     // V(S_t) at collection time
  std::vector<double> advantages;
  std::vector<double> returns;

  std::vector<double> finished_episode_returns;  // episodes completed in this batch
};

/// Mean over samples of the clipped surrogate (to maximize).
ad::NodePtr ppo_clip_objective(const ad::NodePtr& new_log_probs,
                               const Matrix& old_log_probs,
                               const Matrix& advantages, double clip_epsilon);

/// Mean over samples of the squared L2 distance between current and stored
/// pre-activations, summed over the layers in scope (`last`: feature layer
/// only; `all`: every hidden layer up to and including it).
ad::NodePtr pfo_penalty(const nets::ForwardTrace& trace,
                        const std::vector<Matrix>& stored_preactivations,
                        PfoScope scope);

struct LossResult {
  ad::NodePtr total;  // minimized
  double clip_objective = 0.0;
  double pfo = 0.0;
  double entropy = 0.0;
  double value = 0.0;
};

/// -clip + c_PFO * PFO - c_H * entropy + c_VF * value MSE, with advantages
/// normalized per minibatch before the clip objective. `rows` selects the
/// minibatch out of the batch.
LossResult total_loss(const RolloutBatch& batch, const std::vector<std::size_t>& rows,
                      const nets::NetworkParams& actor,
                      const nets::NetworkParams& critic, const PpoConfig& cfg);

struct TrainSetup {
  envs::EnvConfig env;
  std::size_t num_envs = 8;
  std::size_t steps_per_env = 128;
  std::size_t total_env_steps = 200'000;

  std::vector<std::size_t> hidden_widths = {64, 64};
  ad::Activation activation = ad::Activation::relu;

  PpoConfig ppo;

  bool normalize_observations = false;
  std::size_t normalizer_steps = 512;
  std::size_t normalizer_min_episodes = 4;

  double diagnostics_cadence = 0.005;  // fraction of batches between records
  bool capacity_enabled = true;
  double capacity_cadence = 0.025;
  std::size_t capacity_dataset_steps = 512;
  diag::CapacityFitConfig capacity_budget;

  std::uint64_t seed = 1;
};

struct TrainHooks {
  std::function<void(const diag::DiagnosticsRecord&)> on_record;
  std::function<void(std::size_t step, const nets::NetworkParams& actor,
                     const nets::NetworkParams& critic, bool shared_trunk)>
      on_checkpoint;
};

struct TrainResult {
  bool aborted = false;  // NaN loss
  std::size_t env_steps = 0;
  std::vector<diag::DiagnosticsRecord> records;
};

/// The full training loop: collect a rollout with pi_old, optimize the
/// overall loss for K epochs of shuffled minibatches, let pi_old <- pi, and
/// emit diagnostics and checkpoints at their cadences.
class Trainer {
 public:
  explicit Trainer(const TrainSetup& setup);

  TrainResult run(const TrainHooks& hooks = {});

  /// One rollout of num_envs * steps_per_env transitions under the current
  /// parameters, advantages included.
  RolloutBatch collect_rollout();

  /// K epochs of shuffled minibatch updates on one batch. Returns the last
  /// minibatch's loss breakdown, or nullopt on a non-finite loss.
  std::optional<LossResult> optimize_on(const RolloutBatch& batch);

  const nets::NetworkParams& actor() const { return actor_; }
  const nets::NetworkParams& critic() const { return critic_; }
  const envs::Normalizer* normalizer() const {
    return normalizer_.fitted() ? &normalizer_ : nullptr;
  }
  const TrainSetup& setup() const { return setup_; }
  ad::ParameterSet& parameters() { return params_; }
  optim::AdamState& adam_state() { return adam_; }

  /// Probability ratios of the whole batch under the current parameters.
  std::vector<double> batch_ratios(const RolloutBatch& batch) const;

 private:
  ad::NodePtr new_log_prob_node(const RolloutBatch& batch,
                                const std::vector<std::size_t>& rows,
                                const nets::ForwardTrace& trace) const;

  TrainSetup setup_;
  std::vector<std::unique_ptr<envs::Environment>> envs_;
  std::vector<Rng> episode_seeders_;
  std::vector<std::vector<double>> current_obs_;  // raw, per env
  std::vector<double> episode_return_acc_;
  bool discrete_ = true;
  std::size_t obs_dim_ = 0;

  nets::NetworkParams actor_;
  nets::NetworkParams critic_;
  ad::ParameterSet params_;
  optim::AdamState adam_;
  envs::Normalizer normalizer_;

  Rng action_rng_;
  Rng shuffle_rng_;
};

}  // namespace rldyn::ppo
