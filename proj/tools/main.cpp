#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rldyn/config.hpp"
#include "rldyn/diagnostics.hpp"
#include "rldyn/harness.hpp"
#include "rldyn/networks.hpp"
#include "rldyn/toy.hpp"

namespace {

using namespace rldyn;

config::RunConfig load_run_config(const std::string& config_path,
                                  const std::vector<std::string>& overrides,
                                  const std::string& out_dir, int seed) {
  config::Tree tree;
  if (!config_path.empty()) tree = config::load_config_file(config_path);
  for (const std::string& o : overrides) config::apply_override(tree, o);
  config::RunConfig cfg = config::resolve_config(tree);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(seed)};
  return cfg;
}

void write_or_print(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + out_path);
  out << text;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_dir, int seed) {
  config::RunConfig cfg = load_run_config(config_path, overrides, out_dir, seed);
  auto outcomes = harness::run_experiment(cfg);
  bool any_failed = false;
  for (const auto& o : outcomes) {
    if (o.failed) {
      any_failed = true;
      std::printf("FAILED  %s (seed %llu): %s\n", o.paths.run_dir.c_str(),
                  static_cast<unsigned long long>(o.seed), o.failure.c_str());
    } else {
      std::printf("ok      %s  steps=%zu records=%zu\n", o.paths.run_dir.c_str(),
                  o.env_steps, o.record_count);
    }
  }
  return any_failed ? 1 : 0;
}

int cmd_toy(const std::string& config_path, const std::vector<std::string>& overrides,
            const std::string& out_dir, int seed) {
  config::RunConfig cfg = load_run_config(config_path, overrides, "", seed);
  toy::ToyTrace trace = toy::toy_simulate(cfg.toy);
  toy::ToyClaimReport report = toy::toy_verify_claims(trace);

  std::string csv_path = out_dir.empty() ? "toy_trace.csv" : out_dir + "/toy_trace.csv";
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  write_or_print(csv_path, toy::toy_trace_csv(trace));

  const auto& last = trace.updates.back();
  std::printf("alpha=%g phi_x=%.6g updates=%zu\n", cfg.toy.alpha, trace.phi_x,
              trace.updates.size());
  std::printf("final p(a1|x)=%.6f p(a1|y)=%.6f theta=(%.6f, %.6f)\n", last.p_x,
              last.p_y, last.theta1, last.theta2);
  std::printf("claims: own-state nondecreasing %s", report.own_state_nondecreasing ? "yes" : "NO");
  if (cfg.toy.alpha >= 0.0) {
    std::printf(", cross nondecreasing %s", report.cross_state_nondecreasing ? "yes" : "NO");
  }
  if (cfg.toy.alpha <= 0.0) {
    std::printf(", cross nonincreasing %s", report.cross_state_nonincreasing ? "yes" : "NO");
  }
  std::printf("\ntrace written to %s\n", csv_path.c_str());
  return report.all_pass(cfg.toy.alpha) ? 0 : 1;
}

int cmd_capacity(const std::string& config_path,
                 const std::vector<std::string>& overrides,
                 const std::string& checkpoint_path, const std::string& out_path,
                 int seed) {
  config::RunConfig cfg = load_run_config(config_path, overrides, "", seed);
  nets::AgentCheckpoint ck = nets::load_agent_checkpoint(checkpoint_path);

  diag::CapacityFitConfig budget;
  budget.epochs = cfg.capacity_fit_epochs;
  budget.minibatch = cfg.capacity_fit_minibatch;
  budget.adam = cfg.ppo.adam;

  const std::uint64_t probe_seed =
      Rng::derive(cfg.seeds.front(), "capacity_probe").next_u64();
  // The probe dataset must live in the checkpoint's input space; rebuild the
  // run's frozen normalizer when the config uses one.
  envs::Normalizer normalizer;
  const envs::Normalizer* norm_ptr = nullptr;
  if (cfg.normalize_observations) {
    ppo::Trainer bootstrap(cfg.train_setup(cfg.seeds.front()));
    if (bootstrap.normalizer() != nullptr) {
      normalizer = *bootstrap.normalizer();
      norm_ptr = &normalizer;
    }
  }
  diag::CapacityProbe probe =
      diag::make_capacity_probe(ck.actor.spec, ck.critic.spec, cfg.env, norm_ptr,
                                cfg.capacity_dataset_steps, budget, probe_seed);

  const double actor_loss = diag::capacity_loss(ck.actor, probe, diag::CapacityHead::actor);
  const double critic_loss =
      diag::capacity_loss(ck.critic, probe, diag::CapacityHead::critic);
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "{\n  \"capacity_actor\": %.17g,\n  \"capacity_critic\": %.17g\n}\n",
                actor_loss, critic_loss);
  write_or_print(out_path, buf);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PPO training and representation-dynamics diagnostics"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_path;
  std::vector<std::string> overrides;
  std::vector<std::string> metrics_paths;
  int seed = -1;
  double feature_width = 64.0;
  double window_frac = 0.05;

  auto add_common = [&](CLI::App* sub, bool with_config = true) {
    if (with_config) sub->add_option("--config", config_path, "config file path");
    sub->add_option("--override", overrides, "key=value override (repeatable)");
    sub->add_option("--seed", seed, "run a single seed instead of the config list");
    sub->add_option("--out", out_dir, "output directory");
  };

  CLI::App* train = app.add_subcommand("train", "run PPO training experiments");
  add_common(train);

  CLI::App* toy_cmd =
      app.add_subcommand("toy", "simulate the two-state collapsed-feature model");
  add_common(toy_cmd);

  CLI::App* capacity = app.add_subcommand("capacity", "capacity loss of a checkpoint");
  add_common(capacity);
  capacity->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();

  CLI::App* summarize = app.add_subcommand("summarize", "recompute a summary from metrics.jsonl");
  summarize->add_option("metrics", metrics_paths, "metrics.jsonl path")->required();
  summarize->add_option("--window-frac", window_frac, "tail window fraction");
  summarize->add_option("--out", out_dir, "output file (stdout when omitted)");

  CLI::App* correlate =
      app.add_subcommand("correlate", "rank-metric correlations across runs");
  correlate->add_option("metrics", metrics_paths, "metrics.jsonl paths")->required();
  correlate->add_option("--feature-width", feature_width, "width of the feature layer");
  correlate->add_option("--out", out_dir, "output file (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, overrides, out_dir, seed);
    if (toy_cmd->parsed()) return cmd_toy(config_path, overrides, out_dir, seed);
    if (capacity->parsed()) {
      return cmd_capacity(config_path, overrides, checkpoint_path, out_dir, seed);
    }
    if (summarize->parsed()) {
      write_or_print(out_dir, harness::summarize_metrics_file(metrics_paths.front(),
                                                              window_frac));
      return 0;
    }
    if (correlate->parsed()) {
      write_or_print(out_dir, harness::correlate_metrics_files(metrics_paths,
                                                               feature_width));
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
