#include "popdyn/simulator.hpp"

#include <numeric>

#include "popdyn/error.hpp"

namespace popdyn {
namespace {

// Redraw budget before a run gives up on finding a user with K candidates.
constexpr int kMaxUserRedraws = 10000;

std::vector<int> candidates_for(const InteractionLog& log, int user) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(log.n_items() - log.n_clicked_by(user)));
  for (int i = 0; i < log.n_items(); ++i) {
    if (!log.has_clicked(user, i)) out.push_back(i);
  }
  return out;
}

TrainConfig trainer_for_retrain(const SimConfig& cfg, std::int64_t retrain_index) {
  TrainConfig tc = cfg.trainer;
  tc.seed = derive_seed(cfg.seed ^ cfg.trainer.seed, Stream::kTrain,
                        static_cast<std::uint64_t>(retrain_index));
  return tc;
}

class Run {
 public:
  Run(const GroundTruth& gt, const SimConfig& cfg) : gt_(gt), cfg_(cfg) {}

  SimulationResult execute() {
    cfg_.validate();
    if (gt_.n_items() < cfg_.k) throw Error("simulation: fewer items than K");
    const bool no_cfl = cfg_.cfl_mode == CflMode::kWithoutCfl;

    Rng boot = Rng::stream(cfg_.seed, Stream::kBootstrap);
    result_.log = bootstrap(gt_, cfg_.k, boot);
    if (cfg_.ranker == Ranker::kMf) retrain(0, /*initial=*/true);
    checkpoint(0);

    for (std::int64_t t = 1; t <= cfg_.iterations; ++t) {
      Rng rng = Rng::stream(cfg_.seed, Stream::kIteration, static_cast<std::uint64_t>(t));
      const int user = draw_user(rng);
      const auto candidates = candidates_for(result_.log, user);
      const auto ranking = rank(user, candidates, rng);
      result_.log.append(simulate_clicks(user, ranking, gt_, rng, static_cast<int>(t),
                                         Phase::kPersonalized));

      if (t % cfg_.retrain_every == 0) {
        if (no_cfl) probe(t);
        if (cfg_.ranker == Ranker::kMf) retrain(t, /*initial=*/false);
      }
      if (t % cfg_.checkpoint_every == 0 || t == cfg_.iterations) checkpoint(t);
    }
    return std::move(result_);
  }

 private:
  int draw_user(Rng& rng) {
    for (int attempt = 0; attempt < kMaxUserRedraws; ++attempt) {
      const auto u = static_cast<int>(rng.index(static_cast<std::uint64_t>(gt_.n_users())));
      if (gt_.n_items() - result_.log.n_clicked_by(u) >= cfg_.k) return u;
      ++result_.skipped_users;
    }
    throw Error("simulation: no user has K unclicked items left");
  }

  std::vector<int> rank(int user, std::span<const int> candidates, Rng& rng) {
    switch (cfg_.ranker) {
      case Ranker::kRandom:
        return rank_random(candidates, cfg_.k, rng);
      case Ranker::kPopular:
        return rank_popular(result_.log.click_counts(cfg_.training_phases()), candidates, cfg_.k);
      case Ranker::kMf:
        break;
    }
    const auto counts = result_.log.click_counts(cfg_.training_phases());
    return apply_policy(cfg_.policy, result_.params, user, candidates, counts,
                        result_.log.false_positives(), retrain_index_, cfg_.k);
  }

  // L random recommendations to uniformly drawn users, logged as probes.
  void probe(std::int64_t t) {
    for (int j = 0; j < cfg_.retrain_every; ++j) {
      Rng rng = Rng::stream(cfg_.seed, Stream::kProbe,
                            static_cast<std::uint64_t>(t) * static_cast<std::uint64_t>(cfg_.retrain_every) + j);
      const int user = draw_user(rng);
      const auto candidates = candidates_for(result_.log, user);
      const auto ranking = rank_random(candidates, cfg_.k, rng);
      result_.log.append(simulate_clicks(user, ranking, gt_, rng, static_cast<int>(t),
                                         Phase::kRandomProbe));
    }
  }

  void retrain(std::int64_t t, bool initial) {
    const std::int64_t index = initial ? 0 : retrain_index_ + 1;
    const TrainConfig tc = trainer_for_retrain(cfg_, index);
    const bool warm = !initial && cfg_.trainer.warm_start;
    try {
      ModelParams next = train(result_.log, cfg_.training_phases(), tc,
                               warm ? &result_.params : nullptr);
      next.retrain_index = index;
      result_.params = std::move(next);
      retrain_index_ = index;
    } catch (const Error& e) {
      throw SimulationAborted(std::string("retrain failed at iteration ") + std::to_string(t) +
                                  ": " + e.what(),
                              result_.params, t);
    }
  }

  void checkpoint(std::int64_t t) {
    const auto counts = result_.log.click_counts(cfg_.metric_phases());
    const std::int64_t clicks = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
    const double alpha = cfg_.ranker == Ranker::kMf ? cfg_.policy.alpha_at(retrain_index_) : 0.0;
    result_.series.add({.iteration = t,
                        .cumulative_clicks = clicks,
                        .gini_tpr = tpr_gini(counts, gt_),
                        .alpha = alpha});
  }

  const GroundTruth& gt_;
  const SimConfig& cfg_;
  SimulationResult result_;
  std::int64_t retrain_index_ = 0;
};

}  // namespace

std::string_view to_string(CflMode mode) {
  return mode == CflMode::kWithCfl ? "with_cfl" : "without_cfl";
}

std::string_view to_string(Ranker ranker) {
  switch (ranker) {
    case Ranker::kMf: return "mf";
    case Ranker::kPopular: return "popular";
    case Ranker::kRandom: return "random";
  }
  return "unknown";
}

void SimConfig::validate() const {
  if (k < 1) throw Error("K must be >= 1");
  if (retrain_every < 1) throw Error("L must be >= 1");
  if (iterations < 0) throw Error("T must be >= 0");
  if (checkpoint_every < 1 || checkpoint_every % retrain_every != 0) {
    throw Error("checkpoint_every must be a positive multiple of L");
  }
  if (repeats < 1) throw Error("repeats must be >= 1");
  policy.validate();
  trainer.validate();
}

PhaseMask SimConfig::training_phases() const {
  if (cfl_mode == CflMode::kWithoutCfl) return {Phase::kBootstrap, Phase::kRandomProbe};
  return {Phase::kBootstrap, Phase::kPersonalized};
}

PhaseMask SimConfig::metric_phases() const {
  if (cfl_mode == CflMode::kWithoutCfl) return {Phase::kPersonalized};
  return {Phase::kBootstrap, Phase::kPersonalized};
}

InteractionLog bootstrap(const GroundTruth& gt, int k, Rng& rng) {
  if (gt.n_items() < k) throw Error("bootstrap: fewer items than K");
  InteractionLog log(gt.n_users(), gt.n_items());
  std::vector<int> all(static_cast<std::size_t>(gt.n_items()));
  std::iota(all.begin(), all.end(), 0);
  for (int u = 0; u < gt.n_users(); ++u) {
    const auto ranking = rank_random(all, k, rng);
    log.append(simulate_clicks(u, ranking, gt, rng, 0, Phase::kBootstrap));
  }
  return log;
}

SimulationResult run(const GroundTruth& gt, const SimConfig& cfg) {
  return Run(gt, cfg).execute();
}

SimulationResult run_without_cfl(const GroundTruth& gt, const SimConfig& cfg) {
  if (cfg.cfl_mode != CflMode::kWithoutCfl) throw Error("run_without_cfl: cfl_mode must be without_cfl");
  return Run(gt, cfg).execute();
}

double run_static(const GroundTruth& gt, const TrainingSet& training_set, const SimConfig& cfg) {
  cfg.validate();
  if (training_set.positives.empty()) throw Error("run_static: empty training set");
  InteractionLog train_log(gt.n_users(), gt.n_items());
  for (const auto& [u, i] : training_set.positives) {
    if (!gt.likes(u, i)) throw Error("run_static: training pair is not a ground-truth positive");
    train_log.append(ExposureRecord{.user = u, .item = i, .position = 1, .clicked = true});
  }
  const ModelParams params = train(train_log, PhaseMask::all(), trainer_for_retrain(cfg, 0));

  Rng rng = Rng::stream(cfg.seed, Stream::kStatic);
  ClickCounts clicks(static_cast<std::size_t>(gt.n_items()), 0);
  const ClickCounts train_counts = train_log.click_counts(PhaseMask::all());
  for (int u = 0; u < gt.n_users(); ++u) {
    const auto candidates = candidates_for(train_log, u);
    if (candidates.size() < static_cast<std::size_t>(cfg.k)) continue;
    const auto ranking = apply_policy(cfg.policy, params, u, candidates, train_counts,
                                      train_log.false_positives(), 0, cfg.k);
    for (const auto& rec : simulate_clicks(u, ranking, gt, rng, 1, Phase::kPersonalized)) {
      if (rec.clicked) ++clicks[static_cast<std::size_t>(rec.item)];
    }
  }
  return tpr_gini(clicks, gt);
}

std::uint64_t repeat_seed(std::uint64_t base_seed, int repeat) {
  return derive_seed(base_seed, Stream::kRepeat, static_cast<std::uint64_t>(repeat));
}

}  // namespace popdyn
