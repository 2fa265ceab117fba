#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rldyn/environments.hpp"
#include "rldyn/matrix.hpp"
#include "rldyn/networks.hpp"
#include "rldyn/optim.hpp"

namespace rldyn::diag {

using rldyn::Matrix;

// ---------------------------------------------------------------------------
// Rank metrics
// ---------------------------------------------------------------------------

/// Singular values of an N x D feature matrix (D < N), descending. Computed
/// as square roots of the eigenvalues of the D x D Gram matrix, eigen-solved
/// by cyclic Jacobi rotations. Eigenvalues below lambda_max * D * eps are
/// treated as exact zeros: squaring the matrix limits resolution of
/// sigma_i / sigma_1 to about sqrt(eps) anyway, and rank-deficient fixtures
/// must come out with exact zero tails.
std::vector<double> singular_values(const Matrix& phi);

struct RankReport {
  double effective_rank = 0.0;       // exp of spectrum entropy
  std::size_t approximate_rank = 0;  // 99% of variance (sigma^2 mass)
  std::size_t srank = 0;             // 99% of sigma mass
  std::size_t feature_rank_abs = 0;  // #{sigma_i / sqrt(N) > delta}
  std::size_t epsilon_rank = 0;      // #{sigma_i / (sigma_1 * N) > 64-bit eps}
  std::vector<double> sigma;         // descending
};

RankReport rank_report(const Matrix& phi, double delta = 0.01,
                       double feature_rank_delta = 0.01);

/// Same metrics from an externally supplied spectrum (for constructed
/// fixtures); `n_samples` plays the role of N.
RankReport rank_report_from_spectrum(std::vector<double> sigma,
                                     std::size_t n_samples, double delta = 0.01,
                                     double feature_rank_delta = 0.01);

// ---------------------------------------------------------------------------
// Per-batch feature and policy statistics
// ---------------------------------------------------------------------------

/// Dead neurons of the feature (penultimate) layer: a ReLU column is dead
/// when it is zero on every sample, a tanh column when its across-sample
/// standard deviation is below 0.001.
std::size_t dead_neurons(const nets::FeatureProbe& probe, ad::Activation kind);

struct FeatureStats {
  double preactivation_norm = 0.0;  // mean per-sample L2 norm of pre-activations
  double feature_norm = 0.0;        // same for activations
};

FeatureStats feature_stats(const nets::FeatureProbe& probe);

/// Across-state variance of the policy output: for categorical policies the
/// mean over actions of the variance of pi(a|s) across the batch; for
/// tanhnormal the mean over action dimensions of the variance of the mean
/// parameter.
double policy_variance_across_states(const nets::DistParams& dist);

/// Mean of ratios above 1+eps divided by mean of ratios below 1-eps;
/// absent when either side is empty ("trivial" ratios). Continuous policies
/// clamp both partial means into [1e-12, 1e12] first.
std::optional<double> excess_ratio(const std::vector<double>& ratios, double eps,
                                   bool continuous_policy);

struct RatioStats {
  std::optional<double> above_mean;  // mean of ratios > 1+eps
  std::optional<double> below_mean;  // mean of ratios < 1-eps
  std::optional<double> excess;
};

RatioStats ratio_stats(const std::vector<double>& ratios, double eps,
                       bool continuous_policy);

// ---------------------------------------------------------------------------
// Capacity loss
// ---------------------------------------------------------------------------

struct CapacityFitConfig {
  std::size_t epochs = 4;
  std::size_t minibatch = 64;
  optim::AdamConfig adam;  // reconstructed from its initial state per fit
};

/// A frozen target-fitting task: a random same-architecture model, a fixed
/// set of observations collected by that target, and the optimization
/// budget. Built once per run and reused at every scheduled evaluation.
struct CapacityProbe {
  nets::NetworkParams target_actor;
  nets::NetworkParams target_critic;
  Matrix dataset;  // observations, in the same input space as training
  CapacityFitConfig budget;
  std::uint64_t seed = 0;
};

CapacityProbe make_capacity_probe(const nets::MlpSpec& actor_spec,
                                  const nets::MlpSpec& critic_spec,
                                  const envs::EnvConfig& env_cfg,
                                  const envs::Normalizer* normalizer,
                                  std::size_t dataset_steps,
                                  const CapacityFitConfig& budget,
                                  std::uint64_t probe_seed);

enum class CapacityHead { actor, critic };

/// Clone the checkpoint, fit it to the probe target with a fresh optimizer
/// for the probe budget, and return the final loss on the full dataset:
/// mean squared error for the critic, mean forward KL (target || model) for
/// the actor. TanhNormal KL is evaluated between the base Normal
/// distributions (the tanh squashing leaves KL unchanged).
double capacity_loss(const nets::NetworkParams& checkpoint,
                     const CapacityProbe& probe, CapacityHead head);

// ---------------------------------------------------------------------------
// Series tooling: windows, smoothing, correlations
// ---------------------------------------------------------------------------

enum class WindowMode { tail, last_nontrivial_ratio };

/// Aggregate a logged metric series into one number.
///  - tail: mean over the final window_frac of the run.
///  - last_nontrivial_ratio: mean over the window of the same width whose
///    upper limit is the last step with a present entry; absent when fewer
///    than 10 entries are present in the whole series.
/// `run_length` fixes the window width (max(1, round(frac * run_length))).
std::optional<double> window_aggregate(
    const std::vector<std::optional<double>>& series, std::size_t run_length,
    double window_frac, WindowMode mode);

double tail_window_mean(const std::vector<double>& series, std::size_t run_length,
                        double window_frac);

/// s_0 = x_0; s_t = coeff * x_t + (1 - coeff) * s_{t-1}.
std::vector<double> ewma_smooth(const std::vector<double>& series, double coeff = 0.05);

struct CorrelationReport {
  std::optional<double> kendall_tau;
  std::optional<double> spearman_rho;
  std::optional<double> pearson_r;
  double normalized_l2 = 0.0;  // sqrt(sum (x-y)^2) / (sqrt(T) * feature_width)
};

/// Correlations between two aligned metric series from one run. The three
/// coefficients are absent when either series is constant.
CorrelationReport series_correlations(const std::vector<double>& x,
                                      const std::vector<double>& y,
                                      double feature_width);

// ---------------------------------------------------------------------------
// Per-step record and its JSON Lines form
// ---------------------------------------------------------------------------

struct LossBreakdown {
  double total = 0.0;
  double clip_objective = 0.0;  // value being maximized
  double pfo = 0.0;
  double entropy = 0.0;
  double value = 0.0;
};

struct DiagnosticsRecord {
  std::size_t step = 0;         // environment steps collected so far
  std::size_t batch_index = 0;  // rollout counter

  // Episodic returns: latest batch that contained finished episodes.
  std::optional<double> return_mean, return_min, return_max;
  std::size_t return_count = 0;

  double entropy = 0.0;
  double policy_variance = 0.0;
  std::size_t dead_neuron_count = 0;
  double preactivation_norm = 0.0;
  double feature_norm = 0.0;
  RankReport actor_rank;
  RankReport critic_rank;

  std::optional<double> ratio_above_mean, ratio_below_mean, excess_ratio;
  LossBreakdown losses;
  std::optional<double> capacity_actor, capacity_critic;
  bool nan_abort = false;
};

/// One JSON object, no trailing newline. Field names are part of the file
/// format and stable.
std::string to_json_line(const DiagnosticsRecord& record);
DiagnosticsRecord record_from_json_line(const std::string& line);

}  // namespace rldyn::diag
