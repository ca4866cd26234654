#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mjc/errors.hpp"

namespace mjc {

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

inline double mean(const std::vector<double>& xs) {
  if (xs.empty()) throw UsageError("mean: empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double sample_variance(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(n - 1);
}

inline Estimate mean_with_stderr(const std::vector<double>& xs) {
  const double m = mean(xs);
  const double v = sample_variance(xs);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

// Mean with a batch-means standard error for a correlated (e.g.
// thinned-chain) sequence. The value is the plain sample mean; only the
// error bar comes from the batches.
inline Estimate batch_means(const std::vector<double>& xs,
                            std::size_t n_batches = 20) {
  if (xs.size() < 2 * n_batches)
    throw UsageError("batch_means: need at least 2 samples per batch");
  const std::size_t len = xs.size() / n_batches;
  std::vector<double> bm(n_batches, 0.0);
  for (std::size_t b = 0; b < n_batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += xs[i];
    bm[b] = s / static_cast<double>(len);
  }
  const double v = sample_variance(bm);
  return {mean(xs), std::sqrt(v / static_cast<double>(n_batches))};
}

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw UsageError("quantile: empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double w = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - w) + sorted[lo + 1] * w;
}

inline double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  return quantile_sorted(xs, 0.5);
}

inline double interquartile_range(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  return quantile_sorted(xs, 0.75) - quantile_sorted(xs, 0.25);
}

// Two-sample Kolmogorov-Smirnov distance, sup_t |F1(t) - F2(t)|.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw UsageError("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na -
                              static_cast<double>(j) / nb));
  }
  return d;
}

// Expected two-sample KS distance scale under equal laws.
inline double ks_noise_floor(std::size_t na, std::size_t nb) {
  const double n = static_cast<double>(na) * static_cast<double>(nb) /
                   static_cast<double>(na + nb);
  return 1.36 / std::sqrt(n);
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LinearFit linear_fit(const std::vector<double>& x,
                            const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw UsageError("linear_fit: need two samples of equal length >= 2");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw UsageError("linear_fit: degenerate abscissae");
  LinearFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

}  // namespace mjc
