#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ehlab/errors.hpp"

namespace ehlab {

/// Monte Carlo estimate with its standard error.
struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/**
 * Running batch-means accumulator for an autocorrelated sequence of known
 * length. The sequence is cut into `batches` contiguous batches; the standard
 * error is the sample standard deviation of the batch means over sqrt(batches).
 */
class BatchMeans {
 public:
  BatchMeans(std::uint64_t total, std::uint64_t batches = 100)
      : per_batch_(std::max<std::uint64_t>(1, total / std::max<std::uint64_t>(1, batches))) {}

  void add(double v) {
    sum_ += v;
    ++count_;
    if (++in_batch_ == per_batch_) {
      means_.push_back(batch_sum_ + v);
      means_.back() /= static_cast<double>(per_batch_);
      batch_sum_ = 0.0;
      in_batch_ = 0;
    } else {
      batch_sum_ += v;
    }
  }

  Estimate result() const {
    Estimate e;
    if (count_ == 0) return e;
    e.mean = sum_ / static_cast<double>(count_);
    const auto nb = means_.size();
    if (nb < 2) return e;
    double bm = 0.0;
    for (double m : means_) bm += m;
    bm /= static_cast<double>(nb);
    double ss = 0.0;
    for (double m : means_) ss += (m - bm) * (m - bm);
    e.std_error = std::sqrt(ss / static_cast<double>(nb - 1) / static_cast<double>(nb));
    return e;
  }

 private:
  std::uint64_t per_batch_;
  std::uint64_t in_batch_ = 0;
  std::uint64_t count_ = 0;
  double sum_ = 0.0;
  double batch_sum_ = 0.0;
  std::vector<double> means_;
};

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw PreconditionError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Asymptotic two-sample KS critical value at level alpha.
inline double ks_critical(std::size_t n, std::size_t m, double alpha = 0.01) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * static_cast<double>(m)));
}

/// Ordinary least-squares slope of y on x.
inline double ols_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw PreconditionError("ols_slope: need >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace ehlab
