#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <string>

#include "ehlab/errors.hpp"

namespace ehlab {

/// Real branches of the Lambert W function.
enum class WBranch { principal, minus_one };

namespace detail {

template <std::floating_point T>
T lambert_w_initial(WBranch branch, T z, T branch_dist) {
  // p = sqrt(2(1 + e z)) is the natural variable around z = -1/e.
  const T p = std::sqrt(T(2) * branch_dist);
  if (branch == WBranch::principal) {
    if (z < T(-0.32)) return T(-1) + p - p * p / T(3) + T(11) / T(72) * p * p * p;
    if (z < T(3)) {
      const T l = std::log1p(z);
      return l * (T(1) - std::log1p(l) / (T(2) + l));
    }
    const T l1 = std::log(z);
    const T l2 = std::log(l1);
    return l1 - l2 + l2 / l1;
  }
  if (z < T(-0.25)) return T(-1) - p - p * p / T(3) - T(11) / T(72) * p * p * p;
  const T l1 = std::log(-z);
  const T l2 = std::log(-l1);
  return l1 - l2 + l2 / l1;
}

}  // namespace detail

/**
 * Lambert W function, the inverse of w -> w e^w, on the two real branches.
 *
 * The principal branch is defined for z >= -1/e and returns W >= -1; the
 * minus_one branch is defined for -1/e <= z < 0 and returns W <= -1. Values of
 * z a few ulps below -1/e are treated as the branch point itself.
 *
 * The initial guess comes from the square-root expansion near the branch
 * point and from log asymptotics elsewhere. Refinement uses Halley's method on
 * w e^w - z, or Newton's method on w + log|w| - log|z| when |w| is large
 * enough that e^w would overflow or underflow.
 */
template <std::floating_point T = double>
T lambert_w(WBranch branch, T z) {
  constexpr T eps = std::numeric_limits<T>::epsilon();
  constexpr int max_iter = 50;
  const T inv_e = std::exp(T(-1));
  const T branch_pt = -inv_e;

  if (std::isnan(z)) throw DomainError("lambert_w: NaN argument");
  if (z < branch_pt * (T(1) + 8 * eps))
    throw DomainError("lambert_w: argument below -1/e: " + std::to_string(z));
  if (branch == WBranch::minus_one && z >= T(0))
    throw DomainError("lambert_w: branch -1 requires z < 0, got " + std::to_string(z));
  if (std::isinf(z)) return z;

  // 1 + e z, with the product split to limit cancellation near the branch point.
  T branch_dist = std::fma(std::exp(T(1)), z, T(1));
  if (branch_dist <= T(4) * eps) return T(-1);
  if (branch == WBranch::principal && z == T(0)) return T(0);

  T w = detail::lambert_w_initial(branch, z, branch_dist);
  const bool log_form =
      (branch == WBranch::principal && z > T(3)) || (branch == WBranch::minus_one && z > T(-0.25));

  for (int it = 0; it < max_iter; ++it) {
    T step;
    if (log_form) {
      const T log_z = std::log(std::abs(z));
      const T h = w + std::log(std::abs(w)) - log_z;
      if (std::abs(h) <= T(2) * eps * std::max(T(1), std::abs(log_z))) return w;
      step = h / (T(1) + T(1) / w);
    } else {
      const T ew = std::exp(w);
      const T f = w * ew - z;
      if (std::abs(f) <= T(2) * eps * std::max(std::abs(z), std::numeric_limits<T>::min())) return w;
      const T wp1 = w + T(1);
      if (wp1 == T(0)) return w;
      const T fp = ew * wp1;
      step = f / (fp - (w + T(2)) * f / (T(2) * wp1));
    }
    T next = w - step;
    // keep iterates on the requested side of the branch point
    if (branch == WBranch::principal && next < T(-1)) next = (w + T(-1)) / T(2);
    if (branch == WBranch::minus_one && next > T(-1)) next = (w + T(-1)) / T(2);
    const bool done = std::abs(next - w) <= T(4) * eps * std::max(T(1), std::abs(next));
    w = next;
    if (done) return w;
  }
  throw NumericError("lambert_w: no convergence for z = " + std::to_string(z));
}

template <std::floating_point T = double>
T lambert_w0(T z) {
  return lambert_w(WBranch::principal, z);
}

template <std::floating_point T = double>
T lambert_wm1(T z) {
  return lambert_w(WBranch::minus_one, z);
}

}  // namespace ehlab
