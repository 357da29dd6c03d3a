#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "popdyn/interaction_log.hpp"

namespace popdyn {

class GroundTruth;

struct Checkpoint {
  std::int64_t iteration = 0;
  std::int64_t cumulative_clicks = 0;
  double gini_tpr = 0.0;
  double alpha = 0.0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

struct MetricSeries {
  std::vector<Checkpoint> checkpoints;

  /// Appends, enforcing strictly increasing iterations and non-decreasing clicks.
  void add(const Checkpoint& cp);
  const Checkpoint& final() const;

  friend bool operator==(const MetricSeries&, const MetricSeries&) = default;
};

/// C_i / A_i for every item.
std::vector<double> true_positive_rates(std::span<const std::int64_t> counts,
                                        const GroundTruth& gt);
std::vector<double> true_positive_rates(std::span<const std::int64_t> counts,
                                        std::span<const int> audience_sizes);

/// Gini of `values` with items ordered by (order_key, index) ascending:
///   sum_i (2i - M - 1) v_i / (M sum_i v_i),  i = 1..M.
/// Returns 0 when all values are zero. Values must be non-negative.
double gini_of(std::span<const double> values, std::span<const double> order_key);
double gini_of(std::span<const double> values, std::span<const int> order_key);

/// Gini of item TPRs ordered by audience size.
double tpr_gini(std::span<const std::int64_t> counts, const GroundTruth& gt);

/// Clicked records with iteration <= t and phase in `phases`.
std::int64_t cumulative_clicks(const InteractionLog& log, std::int64_t t,
                               PhaseMask phases = PhaseMask::all());

}  // namespace popdyn
