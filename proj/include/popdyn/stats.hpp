#pragma once

#include <span>
#include <vector>

namespace popdyn::stats {

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double stddev(std::span<const double> xs);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> xs, std::span<const double> ys);

/// Least-squares slope of ys against 0, 1, 2, ...
double slope(std::span<const double> ys);

/// Centered moving average; the ends average over the points available.
std::vector<double> smooth3(std::span<const double> ys);

/// True when the sequence rises to an interior peak and then falls: no
/// decrease before the argmax, no increase after it, and the peak strictly
/// above both ends.
bool is_up_then_down(std::span<const double> ys);

struct TTest {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

/// Paired t-test of H1: mean(a - b) > 0.
TTest paired_t_test_greater(std::span<const double> a, std::span<const double> b);

}  // namespace popdyn::stats
