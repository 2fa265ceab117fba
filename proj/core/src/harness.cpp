#include "rldyn/harness.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rldyn/networks.hpp"
#include "rldyn/ppo.hpp"

namespace rldyn::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json scalar_to_json(const config::Scalar& s) {
  if (std::holds_alternative<bool>(s)) return std::get<bool>(s);
  if (std::holds_alternative<std::int64_t>(s)) return std::get<std::int64_t>(s);
  if (std::holds_alternative<double>(s)) return std::get<double>(s);
  return std::get<std::string>(s);
}

/// Resolved config as nested JSON (dotted keys expanded).
json tree_to_json(const config::Tree& tree) {
  json root = json::object();
  for (const auto& [key, value] : tree) {
    json* node = &root;
    std::string rest = key;
    std::size_t dot;
    while ((dot = rest.find('.')) != std::string::npos) {
      node = &(*node)[rest.substr(0, dot)];
      rest = rest.substr(dot + 1);
    }
    if (value.is_array) {
      json arr = json::array();
      for (const auto& s : value.array) arr.push_back(scalar_to_json(s));
      (*node)[rest] = arr;
    } else {
      (*node)[rest] = scalar_to_json(value.scalar);
    }
  }
  return root;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

json opt_json(const std::optional<double>& v) {
  if (v.has_value()) return *v;
  return nullptr;
}

/// Tail aggregate of one record field across the run.
std::optional<double> tail_of(const std::vector<diag::DiagnosticsRecord>& records,
                              double window_frac,
                              const std::function<std::optional<double>(
                                  const diag::DiagnosticsRecord&)>& field) {
  std::vector<std::optional<double>> series;
  series.reserve(records.size());
  for (const auto& r : records) series.push_back(field(r));
  return diag::window_aggregate(series, records.size(), window_frac,
                                diag::WindowMode::tail);
}

}  // namespace

RunPaths run_paths(const config::RunConfig& cfg, const std::string& combo_label,
                   std::uint64_t seed) {
  RunPaths p;
  const std::string combo = combo_label.empty() ? "base" : combo_label;
  p.run_dir = cfg.output_dir + "/" + cfg.experiment + "/" + combo + "/seed_" +
              std::to_string(seed);
  p.metrics = p.run_dir + "/metrics.jsonl";
  p.summary = p.run_dir + "/summary.json";
  p.manifest = p.run_dir + "/manifest.json";
  p.checkpoints = p.run_dir + "/checkpoints";
  return p;
}

std::string summarize_records(const std::vector<diag::DiagnosticsRecord>& records,
                              double window_frac) {
  json metrics = json::object();
  if (!records.empty()) {
    auto tail = [&](auto field) { return opt_json(tail_of(records, window_frac, field)); };
    using R = diag::DiagnosticsRecord;
    metrics["return_mean"] = tail([](const R& r) { return r.return_mean; });
    metrics["entropy"] = tail([](const R& r) { return std::optional<double>(r.entropy); });
    metrics["policy_variance"] =
        tail([](const R& r) { return std::optional<double>(r.policy_variance); });
    metrics["dead_neurons"] = tail([](const R& r) {
      return std::optional<double>(static_cast<double>(r.dead_neuron_count));
    });
    metrics["preactivation_norm"] =
        tail([](const R& r) { return std::optional<double>(r.preactivation_norm); });
    metrics["feature_norm"] =
        tail([](const R& r) { return std::optional<double>(r.feature_norm); });
    metrics["actor_effective_rank"] = tail(
        [](const R& r) { return std::optional<double>(r.actor_rank.effective_rank); });
    metrics["actor_approximate_rank"] = tail([](const R& r) {
      return std::optional<double>(static_cast<double>(r.actor_rank.approximate_rank));
    });
    metrics["actor_srank"] = tail([](const R& r) {
      return std::optional<double>(static_cast<double>(r.actor_rank.srank));
    });
    metrics["actor_feature_rank_abs"] = tail([](const R& r) {
      return std::optional<double>(static_cast<double>(r.actor_rank.feature_rank_abs));
    });
    metrics["actor_epsilon_rank"] = tail([](const R& r) {
      return std::optional<double>(static_cast<double>(r.actor_rank.epsilon_rank));
    });
    metrics["critic_effective_rank"] = tail(
        [](const R& r) { return std::optional<double>(r.critic_rank.effective_rank); });
    metrics["critic_approximate_rank"] = tail([](const R& r) {
      return std::optional<double>(static_cast<double>(r.critic_rank.approximate_rank));
    });
    metrics["loss_total"] =
        tail([](const R& r) { return std::optional<double>(r.losses.total); });
    metrics["loss_clip"] =
        tail([](const R& r) { return std::optional<double>(r.losses.clip_objective); });
    metrics["loss_value"] =
        tail([](const R& r) { return std::optional<double>(r.losses.value); });
    metrics["loss_pfo"] =
        tail([](const R& r) { return std::optional<double>(r.losses.pfo); });
    metrics["capacity_actor"] = tail([](const R& r) { return r.capacity_actor; });
    metrics["capacity_critic"] = tail([](const R& r) { return r.capacity_critic; });

    // Excess ratio: window ending at the last step with non-trivial ratios.
    std::vector<std::optional<double>> excess;
    excess.reserve(records.size());
    for (const auto& r : records) excess.push_back(r.excess_ratio);
    metrics["excess_ratio"] =
        opt_json(diag::window_aggregate(excess, records.size(), window_frac,
                                        diag::WindowMode::last_nontrivial_ratio));
  }

  json summary{{"window_frac", window_frac},
               {"records", records.size()},
               {"metrics", metrics}};
  return summary.dump(2) + "\n";
}

std::vector<diag::DiagnosticsRecord> read_metrics_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file: " + path);
  std::vector<diag::DiagnosticsRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(diag::record_from_json_line(line));
  }
  return records;
}

std::string summarize_metrics_file(const std::string& path, double window_frac) {
  return summarize_records(read_metrics_file(path), window_frac);
}

std::vector<RunOutcome> run_experiment(const config::RunConfig& cfg) {
  std::vector<RunOutcome> outcomes;
  const auto grid = cfg.sweep_grid();

  for (const auto& combo : grid) {
    config::RunConfig run_cfg = cfg;
    std::string label;
    for (const auto& assignment : combo) {
      config::apply_sweep_assignment(run_cfg, assignment);
      if (!label.empty()) label += ",";
      label += assignment.label;
    }

    for (std::uint64_t seed : run_cfg.seeds) {
      RunOutcome outcome;
      outcome.seed = seed;
      outcome.combo_label = label;
      outcome.paths = run_paths(run_cfg, label, seed);
      fs::create_directories(outcome.paths.run_dir);
      if (run_cfg.checkpoints_enabled) fs::create_directories(outcome.paths.checkpoints);

      // Manifest first: the full resolved configuration, the seed, and the
      // artifact paths. Immutable once written.
      json manifest{{"experiment", run_cfg.experiment},
                    {"combo", label.empty() ? "base" : label},
                    {"seed", seed},
                    {"code_version", kCodeVersion},
                    {"config", tree_to_json(config::to_tree(run_cfg))},
                    {"files",
                     {{"metrics", "metrics.jsonl"},
                      {"summary", "summary.json"},
                      {"checkpoints", "checkpoints/"}}}};
      write_text_file(outcome.paths.manifest, manifest.dump(2) + "\n");

      try {
        std::ofstream metrics_out(outcome.paths.metrics, std::ios::binary);
        if (!metrics_out) {
          throw std::runtime_error("cannot open " + outcome.paths.metrics);
        }

        ppo::Trainer trainer(run_cfg.train_setup(seed));
        std::vector<diag::DiagnosticsRecord> records;

        ppo::TrainHooks hooks;
        hooks.on_record = [&](const diag::DiagnosticsRecord& rec) {
          metrics_out << diag::to_json_line(rec) << "\n";
          metrics_out.flush();
          if (!metrics_out) {
            throw std::runtime_error("metrics write failed: partial data kept");
          }
          records.push_back(rec);
        };
        if (run_cfg.checkpoints_enabled) {
          hooks.on_checkpoint = [&](std::size_t step, const nets::NetworkParams& actor,
                                    const nets::NetworkParams& critic, bool shared) {
            char name[32];
            std::snprintf(name, sizeof name, "step_%010zu.bin", step);
            nets::save_agent_checkpoint(outcome.paths.checkpoints + "/" + name, actor,
                                        critic, shared);
          };
        }

        ppo::TrainResult result = trainer.run(hooks);
        outcome.env_steps = result.env_steps;
        outcome.record_count = records.size();
        if (result.aborted) {
          outcome.failed = true;
          outcome.failure = "training aborted on non-finite loss";
          json failure{{"failure", outcome.failure}, {"env_steps", result.env_steps}};
          write_text_file(outcome.paths.run_dir + "/failure.json",
                          failure.dump(2) + "\n");
        }

        write_text_file(outcome.paths.summary, summarize_records(records));
      } catch (const std::exception& e) {
        outcome.failed = true;
        outcome.failure = e.what();
        json failure{{"failure", outcome.failure}};
        write_text_file(outcome.paths.run_dir + "/failure.json", failure.dump(2) + "\n");
      }
      outcomes.push_back(outcome);
    }
  }
  return outcomes;
}

std::string correlate_metrics_files(const std::vector<std::string>& paths,
                                    double feature_width) {
  static const std::array<const char*, 5> kNames = {
      "effective", "approximate", "srank", "feature_abs", "epsilon"};

  auto series_of = [](const std::vector<diag::DiagnosticsRecord>& records,
                      std::size_t metric) {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
      const diag::RankReport& rank = r.actor_rank;
      switch (metric) {
        case 0: out.push_back(rank.effective_rank); break;
        case 1: out.push_back(static_cast<double>(rank.approximate_rank)); break;
        case 2: out.push_back(static_cast<double>(rank.srank)); break;
        case 3: out.push_back(static_cast<double>(rank.feature_rank_abs)); break;
        case 4: out.push_back(static_cast<double>(rank.epsilon_rank)); break;
      }
    }
    return out;
  };

  json pairs = json::object();
  for (std::size_t a = 0; a < kNames.size(); ++a) {
    for (std::size_t b = a + 1; b < kNames.size(); ++b) {
      double tau_sum = 0, rho_sum = 0, r_sum = 0, l2_sum = 0;
      std::optional<double> tau_worst, rho_worst, r_worst, l2_worst;
      std::size_t coef_runs = 0, l2_runs = 0;

      for (const std::string& path : paths) {
        auto records = read_metrics_file(path);
        if (records.size() < 2) continue;
        auto x = series_of(records, a);
        auto y = series_of(records, b);
        diag::CorrelationReport rep = diag::series_correlations(x, y, feature_width);

        l2_sum += rep.normalized_l2;
        ++l2_runs;
        if (!l2_worst || rep.normalized_l2 > *l2_worst) l2_worst = rep.normalized_l2;

        // Constant-series runs have undefined coefficients and are excluded.
        if (rep.kendall_tau.has_value()) {
          tau_sum += *rep.kendall_tau;
          rho_sum += *rep.spearman_rho;
          r_sum += *rep.pearson_r;
          ++coef_runs;
          if (!tau_worst || *rep.kendall_tau < *tau_worst) tau_worst = *rep.kendall_tau;
          if (!rho_worst || *rep.spearman_rho < *rho_worst) rho_worst = *rep.spearman_rho;
          if (!r_worst || *rep.pearson_r < *r_worst) r_worst = *rep.pearson_r;
        }
      }

      json entry;
      entry["runs_with_coefficients"] = coef_runs;
      entry["kendall_tau_mean"] =
          coef_runs ? json(tau_sum / static_cast<double>(coef_runs)) : json(nullptr);
      entry["spearman_rho_mean"] =
          coef_runs ? json(rho_sum / static_cast<double>(coef_runs)) : json(nullptr);
      entry["pearson_r_mean"] =
          coef_runs ? json(r_sum / static_cast<double>(coef_runs)) : json(nullptr);
      entry["normalized_l2_mean"] =
          l2_runs ? json(l2_sum / static_cast<double>(l2_runs)) : json(nullptr);
      entry["kendall_tau_worst"] = opt_json(tau_worst);
      entry["spearman_rho_worst"] = opt_json(rho_worst);
      entry["pearson_r_worst"] = opt_json(r_worst);
      entry["normalized_l2_worst"] = opt_json(l2_worst);
      pairs[std::string(kNames[a]) + "_vs_" + kNames[b]] = entry;
    }
  }

  json out{{"feature_width", feature_width},
           {"runs", paths.size()},
           {"pairs", pairs}};
  return out.dump(2) + "\n";
}

}  // namespace rldyn::harness
