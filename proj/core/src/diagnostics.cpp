#include "rldyn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rldyn::diag {

namespace {

using nlohmann::json;

constexpr std::size_t kMaxJacobiSweeps = 100;

/// Cyclic Jacobi on a symmetric matrix, in place; returns the eigenvalues
/// (diagonal after convergence). Convergence: off-diagonal Frobenius norm
/// below 1e-12, relative to the matrix norm when that is above 1.
std::vector<double> jacobi_eigenvalues(Matrix a) {
  const std::size_t d = a.rows;
  const double tol = 1e-12 * std::max(1.0, frobenius_norm(a));

  for (std::size_t sweep = 0; sweep < kMaxJacobiSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) off += 2.0 * a(p, q) * a(p, q);
    if (std::sqrt(off) < tol) break;

    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        const double app = a(p, p), aqq = a(q, q);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          if (i == p || i == q) continue;
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(p, i) = a(i, p);
          a(i, q) = s * aip + c * aiq;
          a(q, i) = a(i, q);
        }
      }
    }
  }

  std::vector<double> eig(d);
  for (std::size_t i = 0; i < d; ++i) eig[i] = a(i, i);
  return eig;
}

}  // namespace

std::vector<double> singular_values(const Matrix& phi) {
  if (phi.cols >= phi.rows) {
    throw std::invalid_argument("singular_values: needs D < N (got " +
                                std::to_string(phi.rows) + "x" +
                                std::to_string(phi.cols) + ")");
  }
  if (!all_finite(phi)) {
    throw std::invalid_argument("singular_values: non-finite entries");
  }

  const std::size_t d = phi.cols;
  Matrix gram(d, d);
  for (std::size_t i = 0; i < phi.rows; ++i) {
    const double* row = &phi.data[i * d];
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = j; k < d; ++k) gram(j, k) += row[j] * row[k];
  }
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t k = 0; k < j; ++k) gram(j, k) = gram(k, j);

  std::vector<double> eig = jacobi_eigenvalues(std::move(gram));
  std::sort(eig.begin(), eig.end(), std::greater<>());

  // Round-off floor: anything below lambda_max * D * eps is an exact zero of
  // the Gram route's resolution.
  const double floor =
      eig.empty() ? 0.0
                  : std::max(eig.front(), 0.0) * static_cast<double>(d) *
                        std::numeric_limits<double>::epsilon();
  std::vector<double> sigma(d);
  for (std::size_t i = 0; i < d; ++i) {
    sigma[i] = eig[i] > floor ? std::sqrt(eig[i]) : 0.0;
  }
  return sigma;
}

RankReport rank_report_from_spectrum(std::vector<double> sigma,
                                     std::size_t n_samples, double delta,
                                     double feature_rank_delta) {
  std::sort(sigma.begin(), sigma.end(), std::greater<>());
  for (double s : sigma) {
    if (s < 0.0) throw std::invalid_argument("rank_report: negative singular value");
  }

  RankReport report;
  report.sigma = sigma;
  const std::size_t d = sigma.size();
  if (d == 0) return report;

  double sum1 = 0.0, sum2 = 0.0;
  for (double s : sigma) {
    sum1 += s;
    sum2 += s * s;
  }

  if (sum1 > 0.0) {
    double entropy = 0.0;
    for (double s : sigma) {
      const double p = s / sum1;
      if (p > 0.0) entropy -= p * std::log(p);
    }
    report.effective_rank = std::exp(entropy);

    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      acc += sigma[k] * sigma[k];
      if (acc / sum2 > 1.0 - delta) {
        report.approximate_rank = k + 1;
        break;
      }
    }
    acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      acc += sigma[k];
      if (acc / sum1 > 1.0 - delta) {
        report.srank = k + 1;
        break;
      }
    }
  }
  // All-zero spectrum: every rank stays 0, effective rank defined as 0.

  const double sqrt_n = std::sqrt(static_cast<double>(n_samples));
  for (double s : sigma) {
    if (s / sqrt_n > feature_rank_delta) ++report.feature_rank_abs;
  }

  if (sigma[0] > 0.0) {
    const double denom = sigma[0] * static_cast<double>(n_samples);
    for (double s : sigma) {
      if (s / denom > std::numeric_limits<double>::epsilon()) ++report.epsilon_rank;
    }
  }
  return report;
}

RankReport rank_report(const Matrix& phi, double delta, double feature_rank_delta) {
  return rank_report_from_spectrum(singular_values(phi), phi.rows, delta,
                                   feature_rank_delta);
}

std::size_t dead_neurons(const nets::FeatureProbe& probe, ad::Activation kind) {
  const Matrix& feats = probe.features();
  if (feats.rows == 0) throw std::invalid_argument("dead_neurons: empty batch");
  std::size_t dead = 0;
  for (std::size_t j = 0; j < feats.cols; ++j) {
    if (kind == ad::Activation::relu) {
      bool all_zero = true;
      for (std::size_t i = 0; i < feats.rows; ++i) {
        if (feats(i, j) != 0.0) {
          all_zero = false;
          break;
        }
      }
      if (all_zero) ++dead;
    } else {
      double mean = 0.0;
      for (std::size_t i = 0; i < feats.rows; ++i) mean += feats(i, j);
      mean /= static_cast<double>(feats.rows);
      double var = 0.0;
      for (std::size_t i = 0; i < feats.rows; ++i) {
        const double dlt = feats(i, j) - mean;
        var += dlt * dlt;
      }
      var /= static_cast<double>(feats.rows);
      if (std::sqrt(var) < 0.001) ++dead;
    }
  }
  return dead;
}

FeatureStats feature_stats(const nets::FeatureProbe& probe) {
  const Matrix& pre = probe.feature_preacts();
  const Matrix& act = probe.features();
  if (pre.rows == 0) throw std::invalid_argument("feature_stats: empty batch");
  FeatureStats stats;
  for (std::size_t i = 0; i < pre.rows; ++i) {
    double sp = 0.0, sa = 0.0;
    for (std::size_t j = 0; j < pre.cols; ++j) {
      sp += pre(i, j) * pre(i, j);
      sa += act(i, j) * act(i, j);
    }
    stats.preactivation_norm += std::sqrt(sp);
    stats.feature_norm += std::sqrt(sa);
  }
  stats.preactivation_norm /= static_cast<double>(pre.rows);
  stats.feature_norm /= static_cast<double>(pre.rows);
  return stats;
}

double policy_variance_across_states(const nets::DistParams& dist) {
  const Matrix& m = dist.kind == nets::HeadKind::categorical ? dist.logits : dist.mean;
  if (m.rows < 2) {
    throw std::invalid_argument("policy_variance_across_states: need >= 2 states");
  }
  Matrix probs;
  const Matrix* cols = &m;
  if (dist.kind == nets::HeadKind::categorical) {
    probs = Matrix(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
      double mx = m(i, 0);
      for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, m(i, j));
      double sum = 0.0;
      for (std::size_t j = 0; j < m.cols; ++j) sum += std::exp(m(i, j) - mx);
      for (std::size_t j = 0; j < m.cols; ++j) probs(i, j) = std::exp(m(i, j) - mx) / sum;
    }
    cols = &probs;
  }

  const double n = static_cast<double>(cols->rows);
  double total = 0.0;
  for (std::size_t j = 0; j < cols->cols; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < cols->rows; ++i) mean += (*cols)(i, j);
    mean /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < cols->rows; ++i) {
      const double d = (*cols)(i, j) - mean;
      var += d * d;
    }
    total += var / n;
  }
  return total / static_cast<double>(cols->cols);
}

RatioStats ratio_stats(const std::vector<double>& ratios, double eps,
                       bool continuous_policy) {
  RatioStats out;
  double above_sum = 0.0, below_sum = 0.0;
  std::size_t above_n = 0, below_n = 0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw std::invalid_argument("ratio_stats: ratios must be > 0");
    if (r > 1.0 + eps) {
      above_sum += r;
      ++above_n;
    } else if (r < 1.0 - eps) {
      below_sum += r;
      ++below_n;
    }
  }
  if (above_n > 0) out.above_mean = above_sum / static_cast<double>(above_n);
  if (below_n > 0) out.below_mean = below_sum / static_cast<double>(below_n);
  if (above_n > 0 && below_n > 0) {
    double above = *out.above_mean;
    double below = *out.below_mean;
    if (continuous_policy) {
      above = std::clamp(above, 1e-12, 1e12);
      below = std::clamp(below, 1e-12, 1e12);
    }
    out.excess = above / below;
  }
  return out;
}

std::optional<double> excess_ratio(const std::vector<double>& ratios, double eps,
                                   bool continuous_policy) {
  return ratio_stats(ratios, eps, continuous_policy).excess;
}

// ---------------------------------------------------------------------------
// Capacity loss
// ---------------------------------------------------------------------------

CapacityProbe make_capacity_probe(const nets::MlpSpec& actor_spec,
                                  const nets::MlpSpec& critic_spec,
                                  const envs::EnvConfig& env_cfg,
                                  const envs::Normalizer* normalizer,
                                  std::size_t dataset_steps,
                                  const CapacityFitConfig& budget,
                                  std::uint64_t probe_seed) {
  if (dataset_steps == 0) {
    throw std::invalid_argument("make_capacity_probe: dataset_steps must be > 0");
  }
  CapacityProbe probe;
  probe.seed = probe_seed;
  probe.budget = budget;
  probe.target_actor = nets::init_mlp(actor_spec, splitmix_seed(probe_seed, 1));
  probe.target_critic = nets::init_mlp(critic_spec, splitmix_seed(probe_seed, 2));

  // Fixed rollout collected by the target actor itself.
  auto env = envs::make_environment(env_cfg);
  Rng episode_rng = Rng::derive(probe_seed, "capacity_episodes");
  Rng action_rng = Rng::derive(probe_seed, "capacity_actions");

  probe.dataset = Matrix(dataset_steps, actor_spec.input_dim);
  std::vector<double> obs = env->reset(episode_rng.next_u64());
  for (std::size_t row = 0; row < dataset_steps; ++row) {
    std::vector<double> net_in = normalizer ? normalizer->apply(obs) : obs;
    for (std::size_t j = 0; j < net_in.size(); ++j) probe.dataset(row, j) = net_in[j];

    Matrix obs_mat(1, net_in.size());
    for (std::size_t j = 0; j < net_in.size(); ++j) obs_mat(0, j) = net_in[j];
    nets::DistParams dist = nets::actor_forward(probe.target_actor, obs_mat).first;

    envs::StepResult res;
    if (dist.kind == nets::HeadKind::categorical) {
      auto sample = nets::categorical_sample_logprob_entropy(dist.logits, action_rng);
      res = env->step({static_cast<double>(sample.actions[0])});
    } else {
      auto sample = nets::tanhnormal_sample_logprob(dist.mean, dist.std, action_rng);
      std::vector<double> a(sample.actions.cols);
      for (std::size_t k = 0; k < a.size(); ++k) a[k] = sample.actions(0, k);
      res = env->step(a);
    }
    if (res.terminated || res.truncated) {
      obs = env->reset(episode_rng.next_u64());
    } else {
      obs = res.observation;
    }
  }
  return probe;
}

namespace {

ad::NodePtr capacity_fit_loss(const nets::NetworkParams& model,
                              const CapacityProbe& probe, CapacityHead head,
                              const Matrix& obs_batch) {
  ad::NodePtr obs = ad::constant(obs_batch);
  nets::ForwardTrace trace = nets::forward_graph(model, obs);

  if (head == CapacityHead::critic) {
    std::vector<double> target_values =
        nets::critic_forward(probe.target_critic, obs_batch).first;
    Matrix target(obs_batch.rows, 1);
    for (std::size_t i = 0; i < target_values.size(); ++i) target(i, 0) = target_values[i];
    return ad::reduce(ad::square(ad::sub(trace.value, ad::constant(target))),
                      ad::Reduce::mean);
  }

  nets::DistParams target_dist = nets::actor_forward(probe.target_actor, obs_batch).first;
  if (target_dist.kind == nets::HeadKind::categorical) {
    // Forward KL(target || model) = sum_a p_t log p_t + cross-entropy.
    const Matrix& tl = target_dist.logits;
    Matrix pt(tl.rows, tl.cols);
    Matrix self_term(tl.rows, 1);  // sum_a p_t log p_t per row
    for (std::size_t i = 0; i < tl.rows; ++i) {
      double mx = tl(i, 0);
      for (std::size_t j = 1; j < tl.cols; ++j) mx = std::max(mx, tl(i, j));
      double sum = 0.0;
      for (std::size_t j = 0; j < tl.cols; ++j) sum += std::exp(tl(i, j) - mx);
      const double lse = mx + std::log(sum);
      double st = 0.0;
      for (std::size_t j = 0; j < tl.cols; ++j) {
        const double lp = tl(i, j) - lse;
        pt(i, j) = std::exp(lp);
        st += pt(i, j) * lp;
      }
      self_term(i, 0) = st;
    }
    ad::NodePtr ce = ad::softmax_cross_entropy(trace.logits, pt);
    return ad::reduce(ad::add(ad::constant(self_term), ce), ad::Reduce::mean);
  }

  // TanhNormal: forward KL of the base normals (the tanh squashing cancels).
  ad::NodePtr kl =
      ad::normal_forward_kl(trace.mean, trace.std, target_dist.mean, target_dist.std);
  return ad::reduce(kl, ad::Reduce::mean);
}

}  // namespace

double capacity_loss(const nets::NetworkParams& checkpoint,
                     const CapacityProbe& probe, CapacityHead head) {
  const nets::NetworkParams& target =
      head == CapacityHead::actor ? probe.target_actor : probe.target_critic;
  if (checkpoint.spec.input_dim != target.spec.input_dim ||
      checkpoint.spec.hidden_widths != target.spec.hidden_widths ||
      checkpoint.spec.head != target.spec.head ||
      checkpoint.spec.head_dim != target.spec.head_dim) {
    throw std::invalid_argument("capacity_loss: checkpoint and probe target "
                                "architectures differ");
  }

  nets::NetworkParams model = nets::clone_network(checkpoint);
  ad::ParameterSet params;
  model.register_in(params, "fit");
  optim::AdamState state(params.scalar_count());
  Rng shuffle_rng = Rng::derive(probe.seed, "capacity_fit_shuffle");

  const std::size_t n = probe.dataset.rows;
  const std::size_t mb = std::min(probe.budget.minibatch, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < probe.budget.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start + mb <= n; start += mb) {
      Matrix batch(mb, probe.dataset.cols);
      for (std::size_t r = 0; r < mb; ++r)
        for (std::size_t c = 0; c < probe.dataset.cols; ++c)
          batch(r, c) = probe.dataset(order[start + r], c);

      ad::NodePtr loss = capacity_fit_loss(model, probe, head, batch);
      params.zero_gradients();
      ad::backward(loss);
      std::vector<double> grads = params.flatten_gradients();
      std::vector<double> values = params.flatten_values();
      optim::adam_step(values, grads, state, probe.budget.adam);
      params.load_values(values);
    }
  }

  return capacity_fit_loss(model, probe, head, probe.dataset)->value.scalar();
}

// ---------------------------------------------------------------------------
// Series tooling
// ---------------------------------------------------------------------------

namespace {

std::size_t window_width(std::size_t run_length, double window_frac) {
  if (!(window_frac > 0.0 && window_frac <= 1.0)) {
    throw std::invalid_argument("window_aggregate: window_frac must be in (0,1]");
  }
  const auto w = static_cast<std::size_t>(
      std::llround(window_frac * static_cast<double>(run_length)));
  return std::max<std::size_t>(w, 1);
}

}  // namespace

std::optional<double> window_aggregate(
    const std::vector<std::optional<double>>& series, std::size_t run_length,
    double window_frac, WindowMode mode) {
  if (series.empty()) throw std::invalid_argument("window_aggregate: empty series");
  const std::size_t w = window_width(run_length, window_frac);

  std::size_t upper = series.size();  // exclusive
  if (mode == WindowMode::last_nontrivial_ratio) {
    std::size_t present = 0;
    std::size_t last_present = 0;
    bool any = false;
    for (std::size_t i = 0; i < series.size(); ++i) {
      if (series[i].has_value()) {
        ++present;
        last_present = i;
        any = true;
      }
    }
    if (!any || present < 10) return std::nullopt;
    upper = last_present + 1;
  }

  const std::size_t lower = upper > w ? upper - w : 0;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = lower; i < upper; ++i) {
    if (series[i].has_value()) {
      sum += *series[i];
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

double tail_window_mean(const std::vector<double>& series, std::size_t run_length,
                        double window_frac) {
  std::vector<std::optional<double>> wrapped(series.begin(), series.end());
  auto r = window_aggregate(wrapped, run_length, window_frac, WindowMode::tail);
  return *r;
}

std::vector<double> ewma_smooth(const std::vector<double>& series, double coeff) {
  if (!(coeff > 0.0 && coeff <= 1.0)) {
    throw std::invalid_argument("ewma_smooth: coeff must be in (0,1]");
  }
  std::vector<double> out;
  out.reserve(series.size());
  double s = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    // Incremental form: exact on constant series and at coeff = 1.
    s = i == 0 ? series[0] : s + coeff * (series[i] - s);
    out.push_back(s);
  }
  return out;
}

CorrelationReport series_correlations(const std::vector<double>& x,
                                      const std::vector<double>& y,
                                      double feature_width) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("series_correlations: need two aligned series "
                                "of length >= 2");
  }
  const std::size_t n = x.size();

  CorrelationReport rep;
  double l2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) l2 += (x[i] - y[i]) * (x[i] - y[i]);
  rep.normalized_l2 = std::sqrt(l2) / (std::sqrt(static_cast<double>(n)) * feature_width);

  auto is_constant = [](const std::vector<double>& s) {
    return std::all_of(s.begin(), s.end(), [&](double v) { return v == s[0]; });
  };
  if (is_constant(x) || is_constant(y)) return rep;  // coefficients undefined

  auto pearson = [n](const std::vector<double>& a, const std::vector<double>& b) {
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
    double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
  };
  rep.pearson_r = pearson(x, y);

  // Spearman: Pearson on average ranks.
  auto ranks = [n](const std::vector<double>& s) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return s[a] < s[b];
    });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && s[idx[j + 1]] == s[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  rep.spearman_rho = pearson(ranks(x), ranks(y));

  // Kendall tau-a over all pairs.
  long long concordant = 0, discordant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[j] - x[i];
      const double dy = y[j] - y[i];
      const double prod = dx * dy;
      if (prod > 0.0) ++concordant;
      else if (prod < 0.0) ++discordant;
    }
  }
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  rep.kendall_tau = static_cast<double>(concordant - discordant) / pairs;

  return rep;
}

// ---------------------------------------------------------------------------
// JSON Lines record format
// ---------------------------------------------------------------------------

namespace {

json opt_to_json(const std::optional<double>& v) {
  if (v.has_value()) return *v;
  return nullptr;
}

std::optional<double> opt_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json rank_to_json(const RankReport& r) {
  return json{{"effective", r.effective_rank},
              {"approximate", r.approximate_rank},
              {"srank", r.srank},
              {"feature_abs", r.feature_rank_abs},
              {"epsilon", r.epsilon_rank}};
}

RankReport rank_from_json(const json& j) {
  RankReport r;
  r.effective_rank = j.at("effective").get<double>();
  r.approximate_rank = j.at("approximate").get<std::size_t>();
  r.srank = j.at("srank").get<std::size_t>();
  r.feature_rank_abs = j.at("feature_abs").get<std::size_t>();
  r.epsilon_rank = j.at("epsilon").get<std::size_t>();
  return r;
}

}  // namespace

std::string to_json_line(const DiagnosticsRecord& r) {
  json j{{"step", r.step},
         {"batch", r.batch_index},
         {"return_mean", opt_to_json(r.return_mean)},
         {"return_min", opt_to_json(r.return_min)},
         {"return_max", opt_to_json(r.return_max)},
         {"return_count", r.return_count},
         {"entropy", r.entropy},
         {"policy_variance", r.policy_variance},
         {"dead_neurons", r.dead_neuron_count},
         {"preactivation_norm", r.preactivation_norm},
         {"feature_norm", r.feature_norm},
         {"actor_rank", rank_to_json(r.actor_rank)},
         {"critic_rank", rank_to_json(r.critic_rank)},
         {"ratio_above", opt_to_json(r.ratio_above_mean)},
         {"ratio_below", opt_to_json(r.ratio_below_mean)},
         {"excess_ratio", opt_to_json(r.excess_ratio)},
         {"loss_total", r.losses.total},
         {"loss_clip", r.losses.clip_objective},
         {"loss_pfo", r.losses.pfo},
         {"loss_entropy", r.losses.entropy},
         {"loss_value", r.losses.value},
         {"capacity_actor", opt_to_json(r.capacity_actor)},
         {"capacity_critic", opt_to_json(r.capacity_critic)},
         {"nan_abort", r.nan_abort}};
  return j.dump();
}

DiagnosticsRecord record_from_json_line(const std::string& line) {
  json j = json::parse(line);
  DiagnosticsRecord r;
  r.step = j.at("step").get<std::size_t>();
  r.batch_index = j.at("batch").get<std::size_t>();
  r.return_mean = opt_from_json(j.at("return_mean"));
  r.return_min = opt_from_json(j.at("return_min"));
  r.return_max = opt_from_json(j.at("return_max"));
  r.return_count = j.at("return_count").get<std::size_t>();
  r.entropy = j.at("entropy").get<double>();
  r.policy_variance = j.at("policy_variance").get<double>();
  r.dead_neuron_count = j.at("dead_neurons").get<std::size_t>();
  r.preactivation_norm = j.at("preactivation_norm").get<double>();
  r.feature_norm = j.at("feature_norm").get<double>();
  r.actor_rank = rank_from_json(j.at("actor_rank"));
  r.critic_rank = rank_from_json(j.at("critic_rank"));
  r.ratio_above_mean = opt_from_json(j.at("ratio_above"));
  r.ratio_below_mean = opt_from_json(j.at("ratio_below"));
  r.excess_ratio = opt_from_json(j.at("excess_ratio"));
  r.losses.total = j.at("loss_total").get<double>();
  r.losses.clip_objective = j.at("loss_clip").get<double>();
  r.losses.pfo = j.at("loss_pfo").get<double>();
  r.losses.entropy = j.at("loss_entropy").get<double>();
  r.losses.value = j.at("loss_value").get<double>();
  r.capacity_actor = opt_from_json(j.at("capacity_actor"));
  r.capacity_critic = opt_from_json(j.at("capacity_critic"));
  r.nan_abort = j.at("nan_abort").get<bool>();
  return r;
}

}  // namespace rldyn::diag
