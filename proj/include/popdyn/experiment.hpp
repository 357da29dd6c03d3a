#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "popdyn/ground_truth.hpp"
#include "popdyn/simulator.hpp"

namespace popdyn {

/// Static factors runs the imbalance and the density sweep together; its
/// density sweep uses the last dataset variant.
enum class ExperimentKind { kDynamic, kStaticImbalance, kStaticDensity, kStaticFactors };

std::string_view to_string(ExperimentKind kind);

struct DatasetSpec {
  enum class Source { kSynthetic, kRatings, kGroundTruthFile };
  Source source = Source::kSynthetic;

  // synthetic
  int n_users = 200;
  int n_items = 500;
  /// More than one value makes an imbalance sweep (one dataset per value).
  std::vector<double> audience_gini{0.64};
  double density = 0.065;
  std::uint64_t seed = 7;
  SynthesisOptions synthesis;

  // ratings
  std::filesystem::path path;
  std::string delimiter = ",";
  double target_density = 0.0657;
  int user_cap = 1000;
  CompletionConfig completion;
};

/// One method column of an experiment, e.g. "dscale(delta=0.01)".
struct MethodSpec {
  std::string label;
  std::string name;  // mf | popular | random | scale | dscale | fpc | fpc_dscale
  Ranker ranker = Ranker::kMf;
  DebiasPolicy policy;
  CflMode cfl_mode = CflMode::kWithCfl;
};

struct ExperimentSpec {
  std::string name = "experiment";
  ExperimentKind kind = ExperimentKind::kDynamic;
  DatasetSpec dataset;
  SimConfig sim;
  std::vector<MethodSpec> methods;
  /// Training densities for the static density sweep.
  std::vector<double> densities;
  /// Training density used by the static imbalance sweep.
  double static_train_density = 0.008;
  std::filesystem::path output_dir = "runs";
  bool write_logs = true;
  /// Worker threads over (method, dataset, repeat); 0 picks the core count.
  int jobs = 0;
  /// Echo of the parsed document with defaults filled in.
  nlohmann::json config;
};

/// Validates and fills defaults. Unknown keys are rejected with their path.
ExperimentSpec parse_config(const nlohmann::json& doc);
/// Reads a JSON config file; `path` may also name a built-in recipe.
ExperimentSpec parse_config(const std::filesystem::path& path);

std::vector<std::string> recipe_names();
/// Built-in experiment document, pinned to desk scale.
std::optional<nlohmann::json> recipe(std::string_view name);
/// Swaps desk-scale sizes for the full constants (1000 users, 3406 items,
/// K=20, T=40000, L=50).
void apply_paper_scale(ExperimentSpec& spec);

struct CheckpointStats {
  std::int64_t iteration = 0;
  double clicks_mean = 0.0;
  double clicks_sd = 0.0;
  double gini_mean = 0.0;
  double gini_sd = 0.0;
  double alpha = 0.0;
};

struct MethodSummary {
  std::string label;
  std::string name;
  std::string dataset;     // dataset variant label, empty for a single dataset
  double x = 0.0;          // sweep coordinate (audience gini or train density)
  double alpha = 0.0;
  double delta = 0.0;
  std::string cfl_mode;
  std::vector<std::uint64_t> seeds;
  std::vector<double> final_gini;
  std::vector<double> total_clicks;
  double final_gini_mean = 0.0;
  double final_gini_sd = 0.0;
  double total_clicks_mean = 0.0;
  double total_clicks_sd = 0.0;
  std::vector<CheckpointStats> checkpoints;
  /// Full per-run trajectories, aligned with `seeds`.
  std::vector<MetricSeries> runs;
};

struct RunSummary {
  std::string experiment;
  std::string kind;
  nlohmann::json config;
  std::vector<MethodSummary> methods;
  std::vector<std::string> failures;

  const MethodSummary& method(std::string_view label) const;
  nlohmann::json to_json() const;
  static RunSummary from_json(const nlohmann::json& doc);
};

/// Runs every method x dataset x repeat. Failed runs are recorded in
/// `failures` and excluded from aggregates. With `write_artifacts`, writes
/// metrics.csv (or static.csv), summary.json, summary.txt, charts, and a
/// run directory per (experiment, seed).
RunSummary run_experiment(const ExperimentSpec& spec, bool write_artifacts = true);

/// Writes the stable metrics.csv schema for dynamic experiments.
void write_metrics_csv(const RunSummary& summary, const std::filesystem::path& path);

struct ComparisonRow {
  std::string family;
  bool feasible = false;
  std::string label;
  double gini_mean = 0.0;
  double gini_sd = 0.0;
  double clicks_mean = 0.0;
  double clicks_sd = 0.0;
};

struct ComparisonTable {
  double band_lo = 0.0;
  double band_hi = 0.0;
  std::vector<ComparisonRow> rows;

  bool all_feasible() const;
  std::string to_text() const;
};

/// For each method family, picks the setting whose mean final Gini lies in
/// [lo, hi] (closest to the band centre) and tabulates its clicks. Families
/// with no setting in the band are reported as infeasible rows.
ComparisonTable compare_at_matched_bias(const std::vector<MethodSummary>& methods, double lo,
                                        double hi);
ComparisonTable compare_at_matched_bias_tol(const std::vector<MethodSummary>& methods,
                                            double target, double tolerance);

}  // namespace popdyn
