#include "popdyn/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "popdyn/error.hpp"
#include "popdyn/ground_truth.hpp"

namespace popdyn {

void MetricSeries::add(const Checkpoint& cp) {
  if (!checkpoints.empty()) {
    const auto& last = checkpoints.back();
    if (cp.iteration <= last.iteration) throw Error("MetricSeries: iterations must increase");
    if (cp.cumulative_clicks < last.cumulative_clicks) {
      throw Error("MetricSeries: cumulative clicks decreased");
    }
  }
  checkpoints.push_back(cp);
}

const Checkpoint& MetricSeries::final() const {
  if (checkpoints.empty()) throw Error("MetricSeries: no checkpoints");
  return checkpoints.back();
}

std::vector<double> true_positive_rates(std::span<const std::int64_t> counts,
                                        std::span<const int> audience_sizes) {
  if (counts.size() != audience_sizes.size()) {
    throw Error("true_positive_rates: " + std::to_string(counts.size()) + " counts vs " +
                std::to_string(audience_sizes.size()) + " audience sizes");
  }
  std::vector<double> tpr(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (audience_sizes[i] < 1) throw Error("true_positive_rates: audience size < 1");
    tpr[i] = static_cast<double>(counts[i]) / audience_sizes[i];
  }
  return tpr;
}

std::vector<double> true_positive_rates(std::span<const std::int64_t> counts,
                                        const GroundTruth& gt) {
  return true_positive_rates(counts, gt.audience_sizes());
}

double gini_of(std::span<const double> values, std::span<const double> order_key) {
  const std::size_t m = values.size();
  if (m == 0) throw Error("gini_of: empty input");
  if (order_key.size() != m) throw Error("gini_of: order key length mismatch");
  for (double v : values) {
    if (v < 0.0) throw Error("gini_of: negative value");
  }

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return order_key[a] < order_key[b]; });

  double weighted = 0.0;
  double total = 0.0;
  const auto md = static_cast<double>(m);
  for (std::size_t rank = 0; rank < m; ++rank) {
    const double v = values[order[rank]];
    weighted += (2.0 * static_cast<double>(rank + 1) - md - 1.0) * v;
    total += v;
  }
  if (total == 0.0) return 0.0;
  return weighted / (md * total);
}

double gini_of(std::span<const double> values, std::span<const int> order_key) {
  std::vector<double> key(order_key.begin(), order_key.end());
  return gini_of(values, key);
}

double tpr_gini(std::span<const std::int64_t> counts, const GroundTruth& gt) {
  const auto tpr = true_positive_rates(counts, gt);
  return gini_of(tpr, gt.audience_sizes());
}

std::int64_t cumulative_clicks(const InteractionLog& log, std::int64_t t, PhaseMask phases) {
  std::int64_t n = 0;
  for (const auto& r : log.records()) {
    if (r.clicked && r.iteration <= t && phases.contains(r.phase)) ++n;
  }
  return n;
}

}  // namespace popdyn
