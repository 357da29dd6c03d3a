#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "popdyn/mf.hpp"

namespace popdyn {

struct Rating {
  std::int32_t user;
  std::int32_t item;
  double rating;
};

/// Explicit ratings with dense 0-based ids.
struct RatingsDataset {
  std::vector<Rating> triples;
  int n_users = 0;
  int n_items = 0;
};

struct RatingsFormat {
  /// Field separator; may be more than one character (e.g. "::").
  std::string delimiter = ",";
  /// Header row is auto-detected when the first line does not parse.
  bool allow_header = true;
};

/// Reads `user<delim>item<delim>rating[<delim>...]` rows. Extra trailing
/// columns (timestamps) are ignored. Raw ids are re-indexed densely in order
/// of first appearance.
RatingsDataset load_ratings(const std::filesystem::path& path,
                            const RatingsFormat& format = {});

/// Hidden binary relevance ("who truly likes what").
class GroundTruth {
 public:
  GroundTruth() = default;

  /// Validates the invariants (every item has a liker, every user likes
  /// something) and derives audience sizes, density and audience Gini.
  GroundTruth(int n_users, int n_items, std::vector<std::uint8_t> relevance,
              std::uint64_t seed = 0);

  int n_users() const noexcept { return n_users_; }
  int n_items() const noexcept { return n_items_; }
  std::uint64_t seed() const noexcept { return seed_; }

  bool likes(int user, int item) const noexcept {
    return relevance_[static_cast<std::size_t>(user) * n_items_ + item] != 0;
  }

  /// Row-major N*M matrix of 0/1.
  std::span<const std::uint8_t> relevance() const noexcept { return relevance_; }
  std::span<const int> audience_sizes() const noexcept { return audience_; }
  double density() const noexcept { return density_; }
  double audience_gini() const noexcept { return audience_gini_; }
  std::int64_t total_likes() const noexcept { return total_likes_; }

  /// All positive (user, item) pairs in row-major order.
  std::vector<std::pair<int, int>> positives() const;

  void save(const std::filesystem::path& path) const;
  static GroundTruth load(const std::filesystem::path& path);

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;

 private:
  int n_users_ = 0;
  int n_items_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::uint8_t> relevance_;
  std::vector<int> audience_;
  std::int64_t total_likes_ = 0;
  double density_ = 0.0;
  double audience_gini_ = 0.0;
};

// One converged fit; the short warm-start defaults mostly learn item popularity here.
inline TrainConfig completion_trainer_defaults() {
  TrainConfig t;
  t.l2 = 0.01;
  t.init_scale = 0.1;
  t.cold_epochs = 100;
  return t;
}

struct CompletionConfig {
  TrainConfig trainer = completion_trainer_defaults();
  /// Observed ratings at or above this value count as likes; lower ones are
  /// explicit dislikes. The default treats every observed rating as a like.
  double positive_min_rating = -1e300;
  std::uint64_t seed = 0;
};

/// Subsamples `user_cap` users, fits the relevance model on their observed
/// ratings, and binarizes all predicted scores with one global threshold
/// chosen so the realized density is closest to `target_density`. Items nobody
/// likes and users who like nothing are dropped afterwards.
GroundTruth complete_and_binarize(const RatingsDataset& ratings,
                                  const CompletionConfig& cfg,
                                  double target_density, int user_cap);

struct SynthesisOptions {
  /// Strength of the low-rank user/item affinity used when choosing which
  /// users like an item. 0 assigns likers uniformly at random.
  double affinity = 2.0;
  int latent_dim = 8;
  /// Bisection budget for the power-law exponent.
  int max_iterations = 100;
};

/// Zipf-shaped audience sizes whose exponent is tuned until the audience Gini
/// is within 0.01 of `target_gini` and total likes are within 5% of
/// `target_density * N * M`. Deterministic given `seed`.
GroundTruth synthesize_ground_truth(int n_users, int n_items, double target_gini,
                                    double target_density, std::uint64_t seed,
                                    const SynthesisOptions& options = {});

/// Audience sizes produced by the synthesizer for a given exponent and scale,
/// before item ids are shuffled. Exposed for testing.
std::vector<int> zipf_audience_sizes(int n_users, int n_items, double exponent,
                                     std::int64_t target_total);

/// Observed positive pairs used as a static training set.
struct TrainingSet {
  double density = 0.0;
  std::vector<std::pair<int, int>> positives;
};

/// Nested training sets: one seeded shuffle of all positives, each density
/// taking a prefix of it.
std::vector<TrainingSet> make_density_variants(const GroundTruth& gt,
                                               std::span<const double> densities,
                                               std::uint64_t seed);

/// Gini of the audience sizes, ordered by audience size.
double audience_gini(const GroundTruth& gt);

}  // namespace popdyn
