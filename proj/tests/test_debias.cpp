#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "popdyn/debias.hpp"
#include "popdyn/error.hpp"
#include "popdyn/interaction_log.hpp"
#include "popdyn/mf.hpp"
#include "popdyn/rng.hpp"

using namespace popdyn;

namespace {

ModelParams toy_model(int n_users, int n_items, std::uint64_t seed) {
  return ModelParams::random(n_users, n_items, 4, 0.5, seed);
}

}  // namespace

TEST(RankRandom, FullPermutationAndDeterminism) {
  const std::vector<int> cands{4, 7, 9, 11};
  Rng a(1), b(1);
  auto r = rank_random(cands, 4, a);
  EXPECT_EQ(r, rank_random(cands, 4, b));
  std::sort(r.begin(), r.end());
  EXPECT_EQ(r, cands);
  Rng c(2);
  EXPECT_THROW(rank_random(cands, 5, c), Error);
}

TEST(RankRandom, TopOneFrequencyIsUniform) {
  const std::vector<int> cands{0, 1, 2, 3, 4};
  Rng rng(3);
  const int n = 100000;
  std::map<int, int> freq;
  for (int i = 0; i < n; ++i) ++freq[rank_random(cands, 2, rng)[0]];
  const double p = 1.0 / 5, sigma = std::sqrt(n * p * (1 - p));
  for (int c : cands) EXPECT_NEAR(freq[c], n * p, 3 * sigma);
}

TEST(RankPopular, OrderAndTies) {
  const std::vector<std::int64_t> zero(6, 0);
  const std::vector<int> cands{5, 2, 4, 3};
  EXPECT_EQ(rank_popular(zero, cands, 2), (std::vector<int>{2, 3}));

  std::vector<std::int64_t> counts{5, 9, 1};  // a, b, c
  const std::vector<int> abc{0, 1, 2};
  EXPECT_EQ(rank_popular(counts, abc, 2), (std::vector<int>{1, 0}));
  counts[2] += 1;
  EXPECT_EQ(rank_popular(counts, abc, 3), (std::vector<int>{1, 0, 2}));
  EXPECT_THROW(rank_popular(counts, abc, 4), Error);
}

TEST(ScaleScores, Examples) {
  const std::vector<std::int64_t> counts{16, 0, 3};
  const std::vector<int> cands{0, 1, 2};
  const std::vector<double> scores{0.8, 0.7, 0.6};
  const auto out = scale_scores(scores, cands, counts, 0.5);
  EXPECT_NEAR(out[0], 0.2, 1e-12);
  EXPECT_NEAR(out[1], 0.7, 1e-12);
  EXPECT_NEAR(out[2], 0.6 / std::sqrt(3.0), 1e-12);
  EXPECT_EQ(scale_scores(scores, cands, counts, 0.0), scores);
  EXPECT_THROW(scale_scores(scores, cands, counts, -0.1), Error);
}

TEST(ScaleScores, MatchesDirectFormula) {
  Rng rng(5);
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = 1 + static_cast<int>(rng.index(10));
    std::vector<std::int64_t> counts(n);
    std::vector<int> cands(n);
    std::vector<double> scores(n);
    for (int i = 0; i < n; ++i) {
      counts[i] = static_cast<std::int64_t>(rng.index(1000));
      cands[i] = i;
      scores[i] = rng.uniform();
    }
    const double alpha = rng.uniform() * 2;
    const auto out = scale_scores(scores, cands, counts, alpha);
    for (int i = 0; i < n; ++i) {
      const double expect = scores[i] / std::pow(std::max<double>(counts[i], 1), alpha);
      ASSERT_NEAR(out[i], expect, 1e-12);
    }
  }
}

TEST(DScaleAlpha, LinearSchedule) {
  EXPECT_EQ(dscale_alpha(0, 0.01), 0.0);
  EXPECT_NEAR(dscale_alpha(10, 0.01), 0.1, 1e-15);
  EXPECT_EQ(dscale_alpha(25, 0.0), 0.0);
}

TEST(FpcCorrect, Examples) {
  EXPECT_DOUBLE_EQ(fpc_correct(0.42, {}), 0.42);
  const std::vector<std::int32_t> top{1};
  EXPECT_NEAR(fpc_correct(0.5, top), 0.0, 1e-12);
  const std::vector<std::int32_t> third{3};
  EXPECT_NEAR(fpc_correct(0.5, third), 1.0 / 3.0, 1e-12);
  const std::vector<std::int32_t> many{1, 2, 5, 9};
  EXPECT_EQ(fpc_correct(0.0, many), 0.0);
  EXPECT_EQ(fpc_correct(1.0, many), 1.0);
}

TEST(FpcCorrect, Errors) {
  EXPECT_THROW(fpc_correct(-0.1, {}), Error);
  EXPECT_THROW(fpc_correct(1.1, {}), Error);
  const std::vector<std::int32_t> bad{0};
  EXPECT_THROW(fpc_correct(0.5, bad), Error);
}

TEST(FpcCorrect, NeverIncreasesAndShrinksWithMoreEvidence) {
  Rng rng(7);
  for (int rep = 0; rep < 500; ++rep) {
    const double theta = rng.uniform();
    std::vector<std::int32_t> pos;
    double prev = theta;
    for (int f = 0; f < 6; ++f) {
      pos.push_back(1 + static_cast<std::int32_t>(rng.index(20)));
      const double v = fpc_correct(theta, pos);
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, prev + 1e-15);
      prev = v;
    }
  }
}

TEST(FpcCorrect, PosteriorVariant) {
  const std::vector<std::int32_t> third{3};
  // 0.5 * 0.5 / (0.5 * 0.5 + 0.5)
  EXPECT_NEAR(fpc_correct(0.5, third, FpcVariant::kPosterior), 1.0 / 3.0, 1e-12);
  const std::vector<std::int32_t> top{1};
  EXPECT_NEAR(fpc_correct(0.5, top, FpcVariant::kPosterior), 0.0, 1e-12);
}

TEST(DebiasPolicy, Validation) {
  DebiasPolicy p;
  p.kind = DebiasKind::kDScale;
  p.delta = -0.01;
  EXPECT_THROW(p.validate(), Error);
  p.delta = 0.01;
  EXPECT_NO_THROW(p.validate());
  EXPECT_NEAR(p.alpha_at(10), 0.1, 1e-15);
  p.kind = DebiasKind::kScale;
  p.alpha = 0.3;
  EXPECT_EQ(p.alpha_at(10), 0.3);
  EXPECT_EQ(debias_kind_from_string("fpc_dscale"), DebiasKind::kFpcDScale);
  EXPECT_THROW(debias_kind_from_string("bogus"), Error);
}

TEST(ApplyPolicy, IdentityCases) {
  const auto params = toy_model(3, 30, 11);
  std::vector<int> cands(30);
  for (int i = 0; i < 30; ++i) cands[i] = i;
  std::vector<std::int64_t> counts(30);
  for (int i = 0; i < 30; ++i) counts[i] = i * 3;
  const FalsePositiveIndex empty(3);
  const auto plain = rank_topk(params, 1, cands, 10);

  EXPECT_EQ(apply_policy({}, params, 1, cands, counts, empty, 4, 10), plain);
  DebiasPolicy fpc{.kind = DebiasKind::kFpc};
  EXPECT_EQ(apply_policy(fpc, params, 1, cands, counts, empty, 4, 10), plain);
  DebiasPolicy ds{.kind = DebiasKind::kDScale, .delta = 0.05};
  EXPECT_EQ(apply_policy(ds, params, 1, cands, counts, empty, 0, 10), plain);
}

TEST(ApplyPolicy, FpcDemotesIgnoredItems) {
  const auto params = toy_model(2, 10, 13);
  std::vector<int> cands(10);
  for (int i = 0; i < 10; ++i) cands[i] = i;
  const std::vector<std::int64_t> counts(10, 0);
  const auto plain = rank_topk(params, 0, cands, 10);
  FalsePositiveIndex fp(2);
  fp.record({0, plain[0], 1, 0, Phase::kPersonalized, false});
  DebiasPolicy fpc{.kind = DebiasKind::kFpc};
  const auto ranked = apply_policy(fpc, params, 0, cands, counts, fp, 1, 10);
  // Ignored at rank 1, so the like-probability collapses to zero.
  EXPECT_EQ(ranked.back(), plain[0]);
}

TEST(ApplyPolicy, ScaleMatchesComposedScores) {
  const auto params = toy_model(2, 12, 17);
  std::vector<int> cands{0, 2, 4, 6, 8, 10};
  std::vector<std::int64_t> counts(12);
  for (int i = 0; i < 12; ++i) counts[i] = (i * 7) % 11;
  const FalsePositiveIndex fp(2);
  DebiasPolicy sc{.kind = DebiasKind::kScale, .alpha = 0.4};
  std::vector<double> raw;
  for (int c : cands) raw.push_back(predict(params, 1, c));
  const auto scaled = scale_scores(raw, cands, counts, 0.4);
  EXPECT_EQ(apply_policy(sc, params, 1, cands, counts, fp, 3, 4), top_k_by_score(cands, scaled, 4));
}
