#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ehlab/errors.hpp"

namespace ehlab {

struct QuadOptions {
  double rel_tol = 1e-11;
  unsigned max_depth = 15;
};

// The Kronrod error estimate carries a roundoff floor near 4e-13 relative;
// tighter requests would only drive the bisection to max_depth.
inline constexpr double kMinRelTol = 1e-12;

/// Adaptive Gauss-Kronrod integral of f over [a, b], split at any breakpoints
/// strictly inside (a, b). The upper limit may be +inf.
template <class F>
double integrate(F&& f, double a, double b, const std::vector<double>& breakpoints = {},
                 QuadOptions opts = {}) {
  if (!(b > a)) return 0.0;
  std::vector<double> pts{a};
  for (double p : breakpoints)
    if (p > a && p < b) pts.push_back(p);
  std::sort(pts.begin() + 1, pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  pts.push_back(b);

  using rule = boost::math::quadrature::gauss_kronrod<double, 31>;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    double err = 0.0;
    const double v = rule::integrate(f, pts[i], pts[i + 1], opts.max_depth, std::max(opts.rel_tol, kMinRelTol), &err);
    if (!std::isfinite(v)) throw NumericError("integrate: non-finite result");
    total += v;
  }
  return total;
}

/// Geometric breakpoints scale, 10 scale, 100 scale, ... up to hi; used for
/// integrands with a boundary layer of width `scale` at the origin.
inline std::vector<double> geometric_breaks(double scale, double hi) {
  std::vector<double> out;
  if (!(scale > 0)) return out;
  for (double x = scale; x < hi; x *= 10.0) out.push_back(x);
  return out;
}

/// Gaussian tail probability Q(x) = P(N(0,1) > x).
inline double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace ehlab
