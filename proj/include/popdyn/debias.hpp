#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "popdyn/interaction_log.hpp"
#include "popdyn/mf.hpp"
#include "popdyn/rng.hpp"

namespace popdyn {

enum class DebiasKind { kNone, kScale, kDScale, kFpc, kFpcDScale };

/// How unclicked exposures update a like-probability.
enum class FpcVariant {
  /// 1 - (1 - theta) / prod_f (1 - delta_f * theta)
  kProductDenominator,
  /// Bayes posterior with one latent relevance:
  /// theta * prod(1 - delta_f) / (theta * prod(1 - delta_f) + 1 - theta)
  kPosterior,
};

std::string_view to_string(DebiasKind kind);
DebiasKind debias_kind_from_string(std::string_view name);

struct DebiasPolicy {
  DebiasKind kind = DebiasKind::kNone;
  double alpha = 0.0;  // fixed exponent for kScale
  double delta = 0.0;  // per-retrain increment for kDScale / kFpcDScale
  FpcVariant fpc_variant = FpcVariant::kProductDenominator;

  void validate() const;
  /// Exponent used at the given retrain index (0 for policies without one).
  double alpha_at(std::int64_t retrain_index) const;
};

/// Uniformly random K-permutation of the candidates.
std::vector<int> rank_random(std::span<const int> candidates, int k, Rng& rng);

/// Descending click count, ties by ascending item index.
std::vector<int> rank_popular(std::span<const std::int64_t> counts, std::span<const int> candidates,
                              int k);

/// score / max(C_i, 1)^alpha for each candidate.
std::vector<double> scale_scores(std::span<const double> scores, std::span<const int> candidates,
                                 std::span<const std::int64_t> counts, double alpha);

/// alpha = retrain_index * delta.
double dscale_alpha(std::int64_t retrain_index, double delta);

/// Like-probability after F unclicked exposures at the given ranks, clamped
/// to [0, 1]. Returns theta unchanged when there are none.
double fpc_correct(double theta, std::span<const std::int32_t> positions,
                   FpcVariant variant = FpcVariant::kProductDenominator);

/// Ranks `candidates` for `user` through the policy's score-correction stack.
std::vector<int> apply_policy(const DebiasPolicy& policy, const ModelParams& params, int user,
                              std::span<const int> candidates,
                              std::span<const std::int64_t> counts,
                              const FalsePositiveIndex& fp_index, std::int64_t retrain_index,
                              int k);

/// Per-candidate final scores produced by `apply_policy` before top-K.
std::vector<double> policy_scores(const DebiasPolicy& policy, const ModelParams& params, int user,
                                  std::span<const int> candidates,
                                  std::span<const std::int64_t> counts,
                                  const FalsePositiveIndex& fp_index,
                                  std::int64_t retrain_index);

}  // namespace popdyn
