#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rldyn/config.hpp"
#include "rldyn/diagnostics.hpp"

namespace rldyn::harness {

inline constexpr const char* kCodeVersion = "rldyn 0.1.0";

struct RunPaths {
  std::string run_dir;
  std::string metrics;      // metrics.jsonl
  std::string summary;      // summary.json
  std::string manifest;     // manifest.json
  std::string checkpoints;  // checkpoints/
};

/// Output layout for one (sweep combo, seed) run under
/// `<output_dir>/<experiment>/<combo or "base">/seed_<n>/`.
RunPaths run_paths(const config::RunConfig& cfg, const std::string& combo_label,
                   std::uint64_t seed);

struct RunOutcome {
  RunPaths paths;
  std::uint64_t seed = 0;
  std::string combo_label;
  bool failed = false;
  std::string failure;
  std::size_t env_steps = 0;
  std::size_t record_count = 0;
};

/// Train every sweep combination for every seed, writing metrics.jsonl,
/// summary.json, manifest.json, and checkpoints per run. A failure inside a
/// run writes failure.json and moves on to the next run.
std::vector<RunOutcome> run_experiment(const config::RunConfig& cfg);

/// Summary values: window aggregates over the logged record series
/// (tail windows; the excess ratio uses the last-nontrivial-ratio window).
std::string summarize_records(const std::vector<diag::DiagnosticsRecord>& records,
                              double window_frac = 0.05);

std::vector<diag::DiagnosticsRecord> read_metrics_file(const std::string& path);

/// Recompute a summary from a raw metrics file (no hidden state).
std::string summarize_metrics_file(const std::string& path, double window_frac = 0.05);

/// Pairwise correlation/distance report of the five actor rank metrics
/// across runs: per-run Kendall/Spearman/Pearson/normalized-L2, averaged and
/// worst-case. Runs with constant series are excluded from the coefficient
/// averages.
std::string correlate_metrics_files(const std::vector<std::string>& paths,
                                    double feature_width);

}  // namespace rldyn::harness
