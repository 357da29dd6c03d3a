#include <gtest/gtest.h>

#include <set>

#include "popdyn/error.hpp"
#include "popdyn/ground_truth.hpp"
#include "popdyn/metrics.hpp"
#include "popdyn/simulator.hpp"

using namespace popdyn;

namespace {

const GroundTruth& small_gt() {
  static const GroundTruth gt = synthesize_ground_truth(60, 120, 0.5, 0.08, 3);
  return gt;
}

SimConfig small_cfg() {
  SimConfig cfg;
  cfg.k = 5;
  cfg.iterations = 300;
  cfg.retrain_every = 25;
  cfg.checkpoint_every = 50;
  cfg.seed = 4;
  cfg.trainer.cold_epochs = 5;
  cfg.trainer.epochs = 1;
  return cfg;
}

}  // namespace

TEST(SimConfig, Validation) {
  auto cfg = small_cfg();
  cfg.checkpoint_every = 30;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = small_cfg();
  cfg.k = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = small_cfg();
  cfg.policy.kind = DebiasKind::kScale;
  cfg.policy.alpha = -1;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = small_cfg();
  cfg.k = 500;
  EXPECT_THROW(run(small_gt(), cfg), Error);
}

TEST(Bootstrap, KRandomItemsPerUser) {
  Rng rng(1);
  const auto log = bootstrap(small_gt(), 5, rng);
  EXPECT_EQ(log.size(), 60u * 5u);
  for (const auto& r : log.records()) {
    EXPECT_EQ(r.phase, Phase::kBootstrap);
    EXPECT_EQ(r.iteration, 0);
  }
}

TEST(Run, DeterministicAcrossCalls) {
  const auto a = run(small_gt(), small_cfg());
  const auto b = run(small_gt(), small_cfg());
  EXPECT_EQ(a.series, b.series);
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(a.log.size(), b.log.size());
  EXPECT_TRUE(std::equal(a.log.records().begin(), a.log.records().end(), b.log.records().begin()));
  auto other = small_cfg();
  other.seed = 5;
  EXPECT_NE(run(small_gt(), other).series, a.series);
}

TEST(Run, CheckpointScheduleAndLogConsistency) {
  auto cfg = small_cfg();
  cfg.iterations = 320;  // not a multiple of checkpoint_every
  const auto res = run(small_gt(), cfg);
  std::vector<std::int64_t> its;
  for (const auto& c : res.series.checkpoints) its.push_back(c.iteration);
  EXPECT_EQ(its, (std::vector<std::int64_t>{0, 50, 100, 150, 200, 250, 300, 320}));
  EXPECT_TRUE(res.log.views_consistent());
  for (const auto& c : res.series.checkpoints) {
    EXPECT_EQ(c.cumulative_clicks, cumulative_clicks(res.log, c.iteration, cfg.metric_phases()));
  }
  EXPECT_EQ(res.params.retrain_index, 320 / 25);
}

TEST(Run, NeverRecommendsAnAlreadyClickedItem) {
  const auto res = run(small_gt(), small_cfg());
  std::set<std::pair<int, int>> clicked;
  std::int32_t current = -1;
  std::vector<std::pair<int, int>> pending;
  for (const auto& r : res.log.records()) {
    if (r.iteration != current) {
      clicked.insert(pending.begin(), pending.end());
      pending.clear();
      current = r.iteration;
    }
    if (r.phase == Phase::kPersonalized) {
      EXPECT_FALSE(clicked.contains({r.user, r.item}));
    }
    if (r.clicked) pending.emplace_back(r.user, r.item);
  }
}

TEST(Run, GiniIsInRangeAndClicksAreMonotone) {
  for (auto ranker : {Ranker::kMf, Ranker::kPopular, Ranker::kRandom}) {
    auto cfg = small_cfg();
    cfg.ranker = ranker;
    const auto res = run(small_gt(), cfg);
    std::int64_t prev = 0;
    for (const auto& c : res.series.checkpoints) {
      EXPECT_GE(c.gini_tpr, -1.0);
      EXPECT_LE(c.gini_tpr, 1.0);
      EXPECT_GE(c.cumulative_clicks, prev);
      prev = c.cumulative_clicks;
    }
  }
}

TEST(Run, DScaleRecordsScheduledAlpha) {
  auto cfg = small_cfg();
  cfg.policy = {.kind = DebiasKind::kDScale, .delta = 0.01};
  const auto res = run(small_gt(), cfg);
  for (const auto& c : res.series.checkpoints) {
    EXPECT_NEAR(c.alpha, 0.01 * static_cast<double>(c.iteration / cfg.retrain_every), 1e-12);
  }
}

TEST(RunWithoutCfl, ProbesTrainButDoNotCount) {
  auto cfg = small_cfg();
  cfg.cfl_mode = CflMode::kWithoutCfl;
  EXPECT_THROW(run_without_cfl(small_gt(), small_cfg()), Error);
  const auto res = run_without_cfl(small_gt(), cfg);
  std::size_t probes = 0;
  for (const auto& r : res.log.records()) probes += r.phase == Phase::kRandomProbe;
  EXPECT_EQ(probes, static_cast<std::size_t>(cfg.iterations / cfg.retrain_every) * cfg.retrain_every * cfg.k);
  EXPECT_EQ(res.series.final().cumulative_clicks, res.log.total_clicks({Phase::kPersonalized}));
  EXPECT_EQ(res.series.checkpoints.front().cumulative_clicks, 0);
}

TEST(Run, DivergentTrainerAborts) {
  auto cfg = small_cfg();
  cfg.trainer.learning_rate = 1e12;
  cfg.trainer.l2 = 0;
  cfg.trainer.propensity_floor = 1e-6;
  EXPECT_THROW(run(small_gt(), cfg), SimulationAborted);
}

TEST(RunStatic, DeterministicAndBounded) {
  const std::vector<double> d{0.02};
  const auto sets = make_density_variants(small_gt(), d, 1);
  auto cfg = small_cfg();
  const double a = run_static(small_gt(), sets[0], cfg);
  EXPECT_EQ(a, run_static(small_gt(), sets[0], cfg));
  EXPECT_GE(a, -1.0);
  EXPECT_LE(a, 1.0);
  EXPECT_THROW(run_static(small_gt(), TrainingSet{}, cfg), Error);
}

TEST(RepeatSeed, DistinctPerRepeat) {
  std::set<std::uint64_t> seeds;
  for (int r = 0; r < 50; ++r) seeds.insert(repeat_seed(1, r));
  EXPECT_EQ(seeds.size(), 50u);
  EXPECT_EQ(repeat_seed(1, 3), repeat_seed(1, 3));
}
