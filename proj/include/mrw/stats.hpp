#pragma once

// Small statistical helpers shared by the estimators.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mrw/error.hpp"

namespace mrw {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

// Count, sum and sum of squares; mergeable in a fixed order.
struct RunningStats {
  double n = 0.0;
  double sum = 0.0;
  double sumsq = 0.0;

  void add(double x) {
    n += 1.0;
    sum += x;
    sumsq += x * x;
  }
  void merge(const RunningStats& o) {
    n += o.n;
    sum += o.sum;
    sumsq += o.sumsq;
  }
  double mean() const { return n > 0 ? sum / n : 0.0; }
  // Population variance; for 0/1 data this is p(1-p).
  double variance() const {
    if (n <= 0) return 0.0;
    const double m = mean();
    return std::max(0.0, sumsq / n - m * m);
  }
  double std_error() const { return n > 0 ? std::sqrt(variance() / n) : 0.0; }
};

// Standard error of the mean of a stationary sequence by non-overlapping batch
// means. Trailing observations that do not fill a batch are dropped.
inline double batch_means_se(std::span<const double> xs, std::size_t batches = 100) {
  if (xs.size() < 2 * batches) batches = std::max<std::size_t>(2, xs.size() / 2);
  if (xs.size() < 2) return 0.0;
  const std::size_t len = xs.size() / batches;
  RunningStats bm;
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t k = 0; k < len; ++k) s += xs[b * len + k];
    bm.add(s / static_cast<double>(len));
  }
  const double var = bm.variance() * bm.n / (bm.n - 1.0);
  return std::sqrt(var / bm.n);
}

// Kolmogorov-Smirnov distance between the empirical law of xs and cdf.
template <class Cdf>
double ks_distance(std::vector<double> xs, Cdf&& cdf) {
  if (xs.empty()) throw DomainError("ks_distance of an empty sample");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max(d, std::max(f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f));
  }
  return d;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

// Ordinary least squares y = intercept + slope x, optionally weighted.
inline LineFit least_squares(std::span<const double> x, std::span<const double> y,
                             std::span<const double> w = {}) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw DomainError("least_squares needs at least two points");
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    sw += wi;
    sx += wi * x[i];
    sy += wi * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    sxx += wi * (x[i] - mx) * (x[i] - mx);
    sxy += wi * (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double wi = w.empty() ? 1.0 : w[i];
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += wi * r * r;
    }
    f.slope_se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return f;
}

}  // namespace mrw
