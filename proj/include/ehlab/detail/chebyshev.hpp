#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "ehlab/errors.hpp"

namespace ehlab::detail {

/// Barycentric interpolant on Chebyshev-Lobatto points of [lo, hi].
class ChebInterpolant {
 public:
  ChebInterpolant(const std::function<double(double)>& f, double lo, double hi, std::size_t n)
      : lo_(lo), hi_(hi), x_(n + 1), fx_(n + 1) {
    for (std::size_t j = 0; j <= n; ++j) {
      x_[j] = node(j, n);
      fx_[j] = f(x_[j]);
    }
  }

  double operator()(double x) const {
    double num = 0.0, den = 0.0;
    const std::size_t n = x_.size() - 1;
    for (std::size_t j = 0; j <= n; ++j) {
      const double diff = x - x_[j];
      if (diff == 0.0) return fx_[j];
      double w = (j % 2 ? -1.0 : 1.0) / diff;
      if (j == 0 || j == n) w *= 0.5;
      num += w * fx_[j];
      den += w;
    }
    return num / den;
  }

  std::size_t degree() const { return x_.size() - 1; }

 private:
  double node(std::size_t j, std::size_t n) const {
    const double c = std::cos(std::numbers::pi * static_cast<double>(j) / static_cast<double>(n));
    return 0.5 * (lo_ + hi_) + 0.5 * (hi_ - lo_) * c;
  }

  double lo_, hi_;
  std::vector<double> x_, fx_;
};

/**
 * Doubles the degree from 16 until the interpolant matches f at the interior
 * Chebyshev points of the first kind to rel_tol times max |f| on the nodes.
 */
inline ChebInterpolant fit_chebyshev(const std::function<double(double)>& f, double lo, double hi,
                                     double rel_tol = 1e-13, std::size_t max_degree = 2048) {
  for (std::size_t n = 16; n <= max_degree; n *= 2) {
    ChebInterpolant p(f, lo, hi, n);
    double scale = 0.0, worst = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = std::cos(std::numbers::pi * (j + 0.5) / static_cast<double>(n));
      const double x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * c;
      const double fx = f(x);
      scale = std::max(scale, std::abs(fx));
      worst = std::max(worst, std::abs(fx - p(x)));
    }
    if (worst <= rel_tol * scale) return p;
  }
  throw NumericError("Chebyshev fit did not converge on [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

}  // namespace ehlab::detail
