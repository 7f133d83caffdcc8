#pragma once

#include <span>
#include <vector>

namespace islock::stats {

double mean(std::span<const double> xs);
/// Sample standard deviation (n − 1); 0 for fewer than two values.
double sample_stddev(std::span<const double> xs);

/// Average ranks (1-based), ties share the mean rank.
std::vector<double> ranks(std::span<const double> xs);
double spearman(std::span<const double> x, std::span<const double> y);

struct WilcoxonResult {
  int n_nonzero = 0;  // pairs with a nonzero difference
  double w_plus = 0;  // rank sum of positive differences
  double z = 0;
  double p_value = 1;  // one-sided, H1: differences tend to be positive
};

/// One-sided Wilcoxon signed-rank test on x − y (H1: x > y). Zero differences
/// are dropped; the normal approximation uses tie-corrected variance and a
/// 0.5 continuity correction.
WilcoxonResult wilcoxon_greater(std::span<const double> x, std::span<const double> y);

}  // namespace islock::stats
