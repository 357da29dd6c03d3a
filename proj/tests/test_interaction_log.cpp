#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "popdyn/error.hpp"
#include "popdyn/interaction_log.hpp"
#include "popdyn/rng.hpp"

using namespace popdyn;

TEST(FalsePositiveIndex, RecordsUntilClicked) {
  FalsePositiveIndex fp(2);
  fp.record({0, 3, 2, 0, Phase::kPersonalized, false});
  fp.record({0, 3, 5, 1, Phase::kPersonalized, false});
  ASSERT_EQ(fp.positions(0, 3).size(), 2u);
  EXPECT_EQ(fp.positions(0, 3)[1], 5);
  EXPECT_TRUE(fp.positions(1, 3).empty());
  fp.record({0, 3, 1, 2, Phase::kPersonalized, true});
  EXPECT_TRUE(fp.positions(0, 3).empty());
  EXPECT_EQ(fp.n_pairs(), 0u);
}

TEST(InteractionLog, CountsAndClickedSet) {
  InteractionLog log(3, 4);
  log.append({0, 1, 1, 0, Phase::kBootstrap, true});
  log.append({1, 1, 2, 1, Phase::kPersonalized, true});
  log.append({2, 2, 1, 2, Phase::kRandomProbe, true});
  log.append({2, 3, 2, 2, Phase::kRandomProbe, false});
  EXPECT_EQ(log.click_counts(PhaseMask::all())[1], 2);
  EXPECT_EQ(log.click_counts({Phase::kPersonalized})[1], 1);
  EXPECT_EQ(log.click_counts({Phase::kBootstrap, Phase::kRandomProbe})[2], 1);
  EXPECT_EQ(log.total_clicks(), 3);
  EXPECT_TRUE(log.has_clicked(2, 2));
  EXPECT_FALSE(log.has_clicked(2, 3));
  EXPECT_EQ(log.n_clicked_by(0), 1);
  EXPECT_EQ(log.false_positives().positions(2, 3).size(), 1u);
}

TEST(InteractionLog, RejectsOutOfRange) {
  InteractionLog log(2, 2);
  EXPECT_THROW(log.append({2, 0, 1, 0, Phase::kBootstrap, false}), Error);
  EXPECT_THROW(log.append({0, 5, 1, 0, Phase::kBootstrap, false}), Error);
  EXPECT_THROW(log.append({0, 0, 0, 0, Phase::kBootstrap, false}), Error);
}

TEST(InteractionLog, IncrementalViewsMatchRebuild) {
  Rng rng(8);
  InteractionLog log(10, 15);
  for (int t = 0; t < 500; ++t) {
    const int u = static_cast<int>(rng.index(10));
    const int i = static_cast<int>(rng.index(15));
    log.append({u, i, 1 + static_cast<int>(rng.index(10)), t, static_cast<Phase>(rng.index(3)),
                rng.bernoulli(0.3)});
  }
  EXPECT_TRUE(log.views_consistent());
  const auto rebuilt = log.recomputed();
  EXPECT_EQ(rebuilt.click_counts(PhaseMask::all()), log.click_counts(PhaseMask::all()));
  EXPECT_EQ(rebuilt.false_positives(), log.false_positives());
}

TEST(InteractionLog, CsvHeaderAndRows) {
  InteractionLog log(1, 2);
  log.append({0, 1, 2, 7, Phase::kPersonalized, true});
  const auto path = std::filesystem::temp_directory_path() / "popdyn_log.csv";
  log.write_csv(path);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "user,item,position,clicked,iteration,phase");
  EXPECT_EQ(row, "0,1,2,1,7,personalized");
  std::filesystem::remove(path);
}
