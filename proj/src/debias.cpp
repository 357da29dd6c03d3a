#include "popdyn/debias.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "popdyn/error.hpp"

namespace popdyn {

std::string_view to_string(DebiasKind kind) {
  switch (kind) {
    case DebiasKind::kNone: return "none";
    case DebiasKind::kScale: return "scale";
    case DebiasKind::kDScale: return "dscale";
    case DebiasKind::kFpc: return "fpc";
    case DebiasKind::kFpcDScale: return "fpc_dscale";
  }
  return "unknown";
}

DebiasKind debias_kind_from_string(std::string_view name) {
  for (auto k : {DebiasKind::kNone, DebiasKind::kScale, DebiasKind::kDScale, DebiasKind::kFpc,
                 DebiasKind::kFpcDScale}) {
    if (to_string(k) == name) return k;
  }
  throw Error("unknown debias kind: " + std::string(name));
}

void DebiasPolicy::validate() const {
  if (!(alpha >= 0)) throw Error("alpha must be non-negative");
  if (!(delta >= 0)) throw Error("delta must be non-negative");
}

double DebiasPolicy::alpha_at(std::int64_t retrain_index) const {
  switch (kind) {
    case DebiasKind::kScale: return alpha;
    case DebiasKind::kDScale:
    case DebiasKind::kFpcDScale: return dscale_alpha(retrain_index, delta);
    default: return 0.0;
  }
}

std::vector<int> rank_random(std::span<const int> candidates, int k, Rng& rng) {
  if (k < 1 || candidates.size() < static_cast<std::size_t>(k)) {
    throw Error("rank_random: too few candidates for K=" + std::to_string(k));
  }
  std::vector<int> pool(candidates.begin(), candidates.end());
  rng.partial_shuffle(std::span<int>(pool), static_cast<std::size_t>(k));
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

std::vector<int> rank_popular(std::span<const std::int64_t> counts, std::span<const int> candidates,
                              int k) {
  std::vector<double> scores(candidates.size());
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    scores[j] = static_cast<double>(counts[static_cast<std::size_t>(candidates[j])]);
  }
  return top_k_by_score(candidates, scores, k);
}

std::vector<double> scale_scores(std::span<const double> scores, std::span<const int> candidates,
                                 std::span<const std::int64_t> counts, double alpha) {
  if (!(alpha >= 0)) throw Error("scale_scores: alpha must be non-negative");
  if (scores.size() != candidates.size()) throw Error("scale_scores: length mismatch");
  std::vector<double> out(scores.begin(), scores.end());
  if (alpha == 0.0) return out;
  for (std::size_t j = 0; j < out.size(); ++j) {
    const auto c = counts[static_cast<std::size_t>(candidates[j])];
    out[j] /= std::pow(static_cast<double>(std::max<std::int64_t>(c, 1)), alpha);
  }
  return out;
}

double dscale_alpha(std::int64_t retrain_index, double delta) {
  if (retrain_index < 0 || !(delta >= 0)) throw Error("dscale_alpha: invalid arguments");
  return static_cast<double>(retrain_index) * delta;
}

double fpc_correct(double theta, std::span<const std::int32_t> positions, FpcVariant variant) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw Error("fpc_correct: theta outside [0, 1]");
  double miss = 1.0;  // product over exposures
  for (auto k : positions) {
    const double delta = examination_prob(k);  // throws for k < 1
    miss *= variant == FpcVariant::kProductDenominator ? 1.0 - delta * theta : 1.0 - delta;
  }
  if (positions.empty() || theta == 0.0 || theta == 1.0) return theta;

  double out = 0.0;
  if (variant == FpcVariant::kProductDenominator) {
    out = miss > 0.0 ? 1.0 - (1.0 - theta) / miss : 0.0;
  } else {
    const double num = theta * miss;
    out = num / (num + 1.0 - theta);
  }
  return std::clamp(out, 0.0, 1.0);
}

std::vector<double> policy_scores(const DebiasPolicy& policy, const ModelParams& params, int user,
                                  std::span<const int> candidates,
                                  std::span<const std::int64_t> counts,
                                  const FalsePositiveIndex& fp_index,
                                  std::int64_t retrain_index) {
  std::vector<double> scores(candidates.size());
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    scores[j] = predict(params, user, candidates[j]);
  }
  const double alpha = policy.alpha_at(retrain_index);
  switch (policy.kind) {
    case DebiasKind::kNone:
      break;
    case DebiasKind::kScale:
    case DebiasKind::kDScale:
      scores = scale_scores(scores, candidates, counts, alpha);
      break;
    case DebiasKind::kFpcDScale:
      scores = scale_scores(scores, candidates, counts, alpha);
      [[fallthrough]];
    case DebiasKind::kFpc:
      for (std::size_t j = 0; j < candidates.size(); ++j) {
        const double theta = std::clamp(scores[j], 0.0, 1.0);
        scores[j] = fpc_correct(theta, fp_index.positions(user, candidates[j]), policy.fpc_variant);
      }
      break;
  }
  return scores;
}

std::vector<int> apply_policy(const DebiasPolicy& policy, const ModelParams& params, int user,
                              std::span<const int> candidates,
                              std::span<const std::int64_t> counts,
                              const FalsePositiveIndex& fp_index, std::int64_t retrain_index,
                              int k) {
  policy.validate();
  const auto scores = policy_scores(policy, params, user, candidates, counts, fp_index, retrain_index);
  return top_k_by_score(candidates, scores, k);
}

}  // namespace popdyn
