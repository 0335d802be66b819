#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "ehlab/errors.hpp"

namespace ehlab::detail {

// The stripe sums alternate in sign and cancel by roughly e^{2 lambda K}, so
// they are carried in 100 significant digits and only the results are rounded.
using wide = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<100>,
                                           boost::multiprecision::et_off>;

inline wide ipow(wide base, unsigned e) {
  wide r = 1;
  while (e) {
    if (e & 1u) r *= base;
    e >>= 1u;
    if (e) base *= base;
  }
  return r;
}

/**
 * Closed-form pieces of the finite-buffer limiting law for exponential harvest
 * with rate lambda, threshold M and capacity K = l M + rem (0 <= rem < M).
 *
 * Section n covers [K - (n+1) M]^+ <= x < K - n M for n = 0..last_section,
 * where last_section = l - 1 if rem = 0 and l otherwise. On section n
 *   g(x) / pi(K) = lambda e^{-t} [1 + sum_{q=1}^{n} a_q (delta q + t)^{q-1} (t/q + delta - 1)]
 * with t = lambda (x - K) and a_q = e^{-delta q} / (q-1)!.
 */
class StripeSums {
 public:
  StripeSums(double rate, double m, double k) : rate_(rate), m_(m), k_(k) {
    if (!(rate > 0 && m > 0 && k > 0)) throw PreconditionError("stripe sums need lambda, M, K > 0");
    const double ratio = k / m;
    double l = std::floor(ratio);
    // K within rounding of an integer multiple of M is taken as exactly l M
    if (std::abs(ratio - std::round(ratio)) <= 1e-12 * ratio) l = std::round(ratio);
    if (l > 1e5) throw PreconditionError("K/M too large for the stripe-wise solution");
    l_ = static_cast<int>(l);
    rem_ = std::max(0.0, k - l * m);
    if (rem_ <= 1e-12 * k) rem_ = 0.0;
    last_ = rem_ == 0.0 ? l_ - 1 : l_;

    delta_ = wide(rate) * wide(m);
    kappa_ = wide(rate) * wide(k);
    const int qmax = std::max(l_, 1);
    a_.assign(qmax + 1, wide(0));
    r_.assign(qmax + 1, wide(0));
    wide fact = 1;  // (q-1)!
    const wide ratio_e = delta_ * exp(-delta_);
    wide ratio_pow = 1;
    for (int q = 1; q <= qmax; ++q) {
      if (q > 1) fact *= (q - 1);
      a_[q] = exp(-delta_ * q) / fact;
      ratio_pow *= ratio_e;
      r_[q] = ratio_pow / (fact * q);
    }
  }

  int whole_sections() const { return l_; }
  double remainder() const { return rem_; }
  int last_section() const { return last_; }
  double capacity() const { return k_; }
  double threshold() const { return m_; }
  double rate() const { return rate_; }

  double section_lo(int n) const { return std::max(k_ - (n + 1) * m_, 0.0); }
  double section_hi(int n) const { return k_ - n * m_; }

  /// Section index containing x in [0, K).
  int section_of(double x) const {
    const int n = static_cast<int>(std::floor((k_ - x) / m_));
    return std::clamp(n, 0, last_);
  }

  /// Bracketed polynomial factor of section n at t = lambda (x - K).
  wide bracket(int n, const wide& t) const {
    wide s = 1;
    for (int q = 1; q <= n; ++q) s += a_[q] * ipow(delta_ * q + t, q - 1) * (t / q + delta_ - 1);
    return s;
  }

  /// g_n(x) / pi(K).
  wide density_over_atom(int n, double x) const {
    const wide t = wide(rate_) * (wide(x) - wide(k_));
    return wide(rate_) * exp(-t) * bracket(n, t);
  }

  /// Mass of the full section n relative to pi(K):
  /// C_n = e^{n delta} (e^delta - 1 + sum_{q=1}^{n} r_q (e^delta (q-(n+1))^q - (q-n)^q)).
  wide section_mass_over_atom(int n) const {
    const wide ed = exp(delta_);
    wide s = ed - 1;
    for (int q = 1; q <= n; ++q)
      s += r_[q] * (ed * ipow(wide(q - (n + 1)), q) - ipow(wide(q - n), q));
    return exp(delta_ * n) * s;
  }

  /// Mass of the partial bottom section [0, rem) relative to pi(K); zero when rem = 0.
  wide partial_mass_over_atom() const {
    if (rem_ == 0.0) return 0;
    const wide er = exp(wide(rate_) * wide(rem_));
    const wide k_over_m = wide(k_) / wide(m_);
    wide s = er - 1;
    for (int q = 1; q <= l_; ++q) s += r_[q] * (er * ipow(wide(q) - k_over_m, q) - ipow(wide(q - l_), q));
    return exp(delta_ * l_) * s;
  }

  /// 1 / pi(K) = 1 + sum_{n<l} C_n + partial term.
  wide inverse_atom() const {
    wide s = 1;
    for (int n = 0; n < l_; ++n) s += section_mass_over_atom(n);
    return s + partial_mass_over_atom();
  }

  /// Sigma_1 = g(0) / (lambda pi(K)).
  wide sigma1() const { return exp(kappa_) * bracket(last_, -kappa_); }

  /// S_q(x): the summand of the section polynomial written in units of delta.
  wide summand(int q, double x) const {
    if (q == 0) return 1;
    const wide y = wide(q) + wide(rate_) * (wide(x) - wide(k_)) / delta_;
    return r_[q] * ipow(y, q - 1) * (y - wide(q) / delta_);
  }

  const wide& delta() const { return delta_; }

 private:
  double rate_, m_, k_;
  int l_ = 0;
  double rem_ = 0.0;
  int last_ = 0;
  wide delta_, kappa_;
  std::vector<wide> a_, r_;
};

}  // namespace ehlab::detail
