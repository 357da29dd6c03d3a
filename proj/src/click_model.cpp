#include "popdyn/click_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "popdyn/error.hpp"
#include "popdyn/ground_truth.hpp"

namespace popdyn {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::kBootstrap: return "bootstrap";
    case Phase::kPersonalized: return "personalized";
    case Phase::kRandomProbe: return "random_probe";
  }
  return "unknown";
}

double examination_prob(int position) {
  if (position < 1) throw Error("examination_prob: position must be >= 1");
  return 1.0 / std::log2(1.0 + static_cast<double>(position));
}

std::vector<ExposureRecord> simulate_clicks(int user, std::span<const int> ranked_items,
                                            const GroundTruth& gt, Rng& rng, int iteration,
                                            Phase phase) {
  if (ranked_items.empty()) throw Error("simulate_clicks: empty ranking");
  std::vector<int> sorted(ranked_items.begin(), ranked_items.end());
  std::sort(sorted.begin(), sorted.end());
  if (auto dup = std::adjacent_find(sorted.begin(), sorted.end()); dup != sorted.end()) {
    throw Error("simulate_clicks: item " + std::to_string(*dup) + " ranked twice");
  }

  std::vector<ExposureRecord> out;
  out.reserve(ranked_items.size());
  for (std::size_t pos = 0; pos < ranked_items.size(); ++pos) {
    const int k = static_cast<int>(pos) + 1;
    const int item = ranked_items[pos];
    const bool examined = rng.bernoulli(examination_prob(k));
    out.push_back({.user = user,
                   .item = item,
                   .position = k,
                   .iteration = iteration,
                   .phase = phase,
                   .clicked = examined && gt.likes(user, item)});
  }
  return out;
}

}  // namespace popdyn
