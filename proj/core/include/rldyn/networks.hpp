#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rldyn/autodiff.hpp"
#include "rldyn/matrix.hpp"
#include "rldyn/rng.hpp"

namespace rldyn::nets {

using rldyn::Matrix;

enum class HeadKind { categorical, tanhnormal, value };

struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_widths;  // non-empty; last entry is the feature layer
  ad::Activation activation = ad::Activation::relu;
  HeadKind head = HeadKind::categorical;
  std::size_t head_dim = 0;  // n_actions, action_dim, or 1 for value

  void validate() const;
};

/// Trainable parameters of one MLP. Hidden layers are shared node handles,
/// so two networks built with a shared trunk literally alias the same
/// leaves. `owns_trunk` controls which network registers the trunk in a
/// ParameterSet (the aliasing one registers only its head).
struct NetworkParams {
  MlpSpec spec;
  std::vector<ad::NodePtr> hidden_w;
  std::vector<ad::NodePtr> hidden_b;
  ad::NodePtr out_w, out_b;    // logits / mean / value head
  ad::NodePtr out2_w, out2_b;  // tanhnormal raw-std head, null otherwise
  bool owns_trunk = true;

  void register_in(ad::ParameterSet& set, const std::string& prefix) const;
};

/// Pre-activations and activations of every hidden layer for one batch.
/// The feature layer is the last (penultimate) entry.
struct FeatureProbe {
  std::vector<Matrix> pre_activations;
  std::vector<Matrix> activations;
  std::size_t penultimate_index() const { return pre_activations.size() - 1; }
  const Matrix& features() const { return activations.back(); }
  const Matrix& feature_preacts() const { return pre_activations.back(); }
};

struct DistParams {
  HeadKind kind = HeadKind::categorical;
  Matrix logits;  // categorical: N x A
  Matrix mean;    // tanhnormal: N x K
  Matrix std;     // tanhnormal: N x K, strictly positive
};

/// Node handles from a graph-building forward pass; keeps the graph alive
/// for backward().
struct ForwardTrace {
  std::vector<ad::NodePtr> preacts;
  std::vector<ad::NodePtr> acts;
  ad::NodePtr logits;
  ad::NodePtr mean;
  ad::NodePtr std;
  ad::NodePtr value;  // N x 1
};

/// Orthogonal initialization, zero biases: gain sqrt(2) on hidden layers,
/// 0.01 on actor output heads, 1.0 on the value head. Deterministic per seed.
NetworkParams init_mlp(const MlpSpec& spec, std::uint64_t seed);

/// Critic that shares every hidden layer with `trunk_owner` and adds its own
/// value head (initialized from `seed`).
NetworkParams make_shared_trunk_critic(const NetworkParams& trunk_owner,
                                       std::uint64_t seed);

/// Graph-building forward pass. obs: N x input_dim, finite.
ForwardTrace forward_graph(const NetworkParams& net, const ad::NodePtr& obs);

FeatureProbe probe_from(const ForwardTrace& trace);

std::pair<DistParams, FeatureProbe> actor_forward(const NetworkParams& net,
                                                  const Matrix& obs);

std::pair<std::vector<double>, FeatureProbe> critic_forward(const NetworkParams& net,
                                                            const Matrix& obs);

struct CategoricalSample {
  std::vector<std::size_t> actions;
  std::vector<double> log_probs;
  std::vector<double> entropy;
};

CategoricalSample categorical_sample_logprob_entropy(const Matrix& logits, Rng& rng);

/// Per-row entropy of softmax(logits) without sampling.
std::vector<double> categorical_entropy(const Matrix& logits);

struct TanhNormalSample {
  Matrix pre_squash;  // u ~ Normal(mean, std)
  Matrix actions;     // tanh(u), in (-1, 1)
  std::vector<double> log_probs;
};

/// Numerical floor inside log(1 - tanh(u)^2 + eps) and on std itself.
inline constexpr double kTanhNormalEps = 1e-6;

TanhNormalSample tanhnormal_sample_logprob(const Matrix& mean, const Matrix& std,
                                           Rng& rng);

/// Log-density of the stored pre-squash sample u under TanhNormal(mean, std),
/// one row of each.
double tanhnormal_log_prob(const Matrix& mean, const Matrix& std,
                           const Matrix& pre_squash, std::size_t row);

/// Differentiable per-sample log-prob nodes (N x 1) for stored actions.
ad::NodePtr categorical_log_prob_node(const ad::NodePtr& logits,
                                      const std::vector<std::size_t>& actions);
ad::NodePtr tanhnormal_log_prob_node(const ad::NodePtr& mean, const ad::NodePtr& std,
                                     const Matrix& pre_squash);

/// Differentiable mean entropy (1x1) of the categorical head.
ad::NodePtr categorical_entropy_mean_node(const ad::NodePtr& logits);

/// Deep copy: fresh leaves with identical values, preserving trunk sharing
/// between the two networks when `shared_trunk` is set.
std::pair<NetworkParams, NetworkParams> clone_pair(const NetworkParams& actor,
                                                   const NetworkParams& critic,
                                                   bool shared_trunk);
NetworkParams clone_network(const NetworkParams& net);

// Checkpoint file format, little-endian:
//   magic "RLDYNNET", u32 version, u32 desc_len, desc (JSON: specs + flags),
//   then per network, per parameter in registration order:
//   u64 count followed by count raw IEEE-754 doubles.
// Round-trips are bit-exact.
struct AgentCheckpoint {
  NetworkParams actor;
  NetworkParams critic;
  bool shared_trunk = false;
};

void save_agent_checkpoint(const std::string& path, const NetworkParams& actor,
                           const NetworkParams& critic, bool shared_trunk);
AgentCheckpoint load_agent_checkpoint(const std::string& path);

}  // namespace rldyn::nets
