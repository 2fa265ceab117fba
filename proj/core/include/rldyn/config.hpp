#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rldyn/environments.hpp"
#include "rldyn/ppo.hpp"
#include "rldyn/toy.hpp"

namespace rldyn::config {

/// Scalar config value. Integers and floats are kept distinct so that a
/// round-trip through text is identity.
using Scalar = std::variant<bool, std::int64_t, double, std::string>;

struct Value {
  bool is_array = false;
  Scalar scalar;
  std::vector<Scalar> array;
};

/// Flat map of dotted keys ("ppo.epochs") to values, parsed from a
/// hierarchical key/value text format:
///
///   experiment = "chain-default"
///   seeds = [1, 2, 3]
///   [ppo]
///   epochs = 4
///   learning_rate = 2.5e-4
///
/// Tables nest with dots in their headers; '#' starts a comment.
using Tree = std::map<std::string, Value>;

Tree parse_config_text(const std::string& text);
Tree load_config_file(const std::string& path);
std::string to_config_text(const Tree& tree);

/// Parse one "key=value" command line override into the tree (replacing any
/// existing value).
void apply_override(Tree& tree, const std::string& assignment);

/// One entry of an intervention grid: the dotted config key it overrides and
/// the value for this run.
struct SweepAssignment {
  std::string key;
  Scalar value;
  std::string label;  // "epochs=4"
};

struct RunConfig {
  std::string experiment = "run";
  std::string output_dir = "runs";

  envs::EnvConfig env;
  std::vector<std::size_t> hidden_widths = {64, 64};
  ad::Activation activation = ad::Activation::relu;

  ppo::PpoConfig ppo;

  std::size_t total_env_steps = 0;  // 0 -> env-kind default
  std::size_t num_envs = 8;
  std::size_t steps_per_env = 128;

  bool normalize_observations = false;
  std::size_t normalizer_steps = 512;
  std::size_t normalizer_min_episodes = 4;

  double diagnostics_cadence = 0.005;
  bool capacity_enabled = true;
  double capacity_cadence = 0.025;
  std::size_t capacity_dataset_steps = 512;
  std::size_t capacity_fit_epochs = 4;
  std::size_t capacity_fit_minibatch = 64;
  bool checkpoints_enabled = true;

  std::vector<std::uint64_t> seeds = {1};

  toy::ToyConfig toy;

  /// Intervention grid: dotted config key -> list of values to sweep.
  std::map<std::string, std::vector<Scalar>> sweep_lists;

  ppo::TrainSetup train_setup(std::uint64_t seed) const;

  /// Cross product of the sweep lists, in sorted key order. A single empty
  /// combination when no sweep is configured.
  std::vector<std::vector<SweepAssignment>> sweep_grid() const;
};

/// Apply one sweep assignment onto a resolved config.
void apply_sweep_assignment(RunConfig& cfg, const SweepAssignment& assignment);

/// Parse, fill defaults, validate. Unknown keys are rejected by name;
/// violated constraints name the offending keys.
RunConfig resolve_config(const Tree& tree);

/// Serialization of the resolved config; parsing it back yields an
/// identical resolved config.
Tree to_tree(const RunConfig& cfg);

std::string env_kind_name(envs::EnvKind kind);
envs::EnvKind env_kind_from_name(const std::string& name);
std::string pfo_scope_name(ppo::PfoScope scope);
ppo::PfoScope pfo_scope_from_name(const std::string& name);

}  // namespace rldyn::config
