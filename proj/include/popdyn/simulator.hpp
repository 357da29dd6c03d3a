#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "popdyn/debias.hpp"
#include "popdyn/error.hpp"
#include "popdyn/ground_truth.hpp"
#include "popdyn/interaction_log.hpp"
#include "popdyn/metrics.hpp"
#include "popdyn/mf.hpp"

namespace popdyn {

enum class CflMode { kWithCfl, kWithoutCfl };
enum class Ranker { kMf, kPopular, kRandom };

std::string_view to_string(CflMode mode);
std::string_view to_string(Ranker ranker);

struct SimConfig {
  int k = 20;
  std::int64_t iterations = 40000;
  int retrain_every = 50;
  int checkpoint_every = 50;
  DebiasPolicy policy;
  TrainConfig trainer;
  CflMode cfl_mode = CflMode::kWithCfl;
  Ranker ranker = Ranker::kMf;
  std::uint64_t seed = 0;
  int repeats = 10;

  void validate() const;

  /// Phases whose clicks feed training and popularity counts.
  PhaseMask training_phases() const;
  /// Phases whose clicks count towards utility and bias metrics.
  PhaseMask metric_phases() const;
};

struct SimulationResult {
  InteractionLog log;
  MetricSeries series;
  ModelParams params;
  /// Users redrawn because fewer than K unclicked items remained.
  std::int64_t skipped_users = 0;
};

/// Thrown when retraining fails mid-run; carries the last good model.
class SimulationAborted : public Error {
 public:
  SimulationAborted(const std::string& what, ModelParams last_good, std::int64_t iteration)
      : Error(what), last_good_(std::move(last_good)), iteration_(iteration) {}

  const ModelParams& last_good() const noexcept { return last_good_; }
  std::int64_t iteration() const noexcept { return iteration_; }

 private:
  ModelParams last_good_;
  std::int64_t iteration_;
};

/// One random K-list per user, all phase=bootstrap.
InteractionLog bootstrap(const GroundTruth& gt, int k, Rng& rng);

/// The closed-loop process; dispatches to the no-feedback variant when
/// cfg.cfl_mode says so.
SimulationResult run(const GroundTruth& gt, const SimConfig& cfg);

/// After every L personalized iterations, L random recommendations to
/// uniformly drawn users are logged as random_probe; the model only ever
/// trains on bootstrap and probe clicks.
SimulationResult run_without_cfl(const GroundTruth& gt, const SimConfig& cfg);

/// Train once on a fixed positive set, recommend K unseen items to every user,
/// simulate one round of clicks and return the TPR Gini.
double run_static(const GroundTruth& gt, const TrainingSet& training_set, const SimConfig& cfg);

/// Seed used by repeat `r` of a configuration.
std::uint64_t repeat_seed(std::uint64_t base_seed, int repeat);

}  // namespace popdyn
