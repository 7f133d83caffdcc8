#include "islock/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace islock::stats {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::vector<double> ranks(std::span<const double> xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> r(xs.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two equal samples of size >= 2");
  const auto rx = ranks(x), ry = ranks(y);
  const double mx = mean(rx), my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

WilcoxonResult wilcoxon_greater(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("wilcoxon: samples differ in length");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != y[i]) diffs.push_back(x[i] - y[i]);
  WilcoxonResult res;
  res.n_nonzero = static_cast<int>(diffs.size());
  if (diffs.empty()) return res;

  std::vector<double> mags(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) mags[i] = std::abs(diffs[i]);
  const auto r = ranks(mags);
  for (std::size_t i = 0; i < diffs.size(); ++i)
    if (diffs[i] > 0) res.w_plus += r[i];

  const double n = static_cast<double>(diffs.size());
  const double expected = n * (n + 1.0) / 4.0;
  double variance = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
  // Tie correction: subtract Σ(t³ − t)/48 over groups of tied magnitudes.
  std::vector<double> sorted = mags;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    variance -= (t * t * t - t) / 48.0;
    i = j + 1;
  }
  if (variance <= 0.0) {
    res.z = res.w_plus > expected ? INFINITY : 0.0;
    res.p_value = res.w_plus > expected ? 0.0 : 1.0;
    return res;
  }
  res.z = (res.w_plus - expected - 0.5) / std::sqrt(variance);
  res.p_value = 0.5 * std::erfc(res.z / std::sqrt(2.0));
  return res;
}

}  // namespace islock::stats
