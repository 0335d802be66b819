#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "ehlab/core_model.hpp"
#include "ehlab/csv.hpp"
#include "ehlab/detail/chebyshev.hpp"
#include "ehlab/detail/stripe_sums.hpp"
#include "ehlab/errors.hpp"
#include "ehlab/quadrature.hpp"
#include "ehlab/special_fn.hpp"

namespace ehlab {

/// A density on [lo, hi).
struct DensitySegment {
  double lo = 0.0;
  double hi = 0.0;
  std::function<double(double)> density;
};

/**
 * Limiting law of the buffer level: piecewise densities on [0, K) plus an atom
 * at K, or a density on the half line [0, inf) with no atom.
 */
class LimitingDistribution {
 public:
  enum class Support { half_line, interval };

  LimitingDistribution(Capacity capacity, std::vector<DensitySegment> segments, double atom)
      : capacity_(capacity), segments_(std::move(segments)), atom_(atom) {
    std::sort(segments_.begin(), segments_.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
    if (!capacity_.is_finite() && atom_ != 0.0) throw PreconditionError("half-line law cannot carry an atom");
  }

  Support support() const { return capacity_.is_finite() ? Support::interval : Support::half_line; }
  Capacity capacity() const { return capacity_; }
  const std::vector<DensitySegment>& segments() const { return segments_; }
  double atom() const { return atom_; }

  double density(double x) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), x,
                               [](double v, const DensitySegment& s) { return v < s.lo; });
    if (it == segments_.begin()) return 0.0;
    --it;
    return x < it->hi ? it->density(x) : 0.0;
  }

  std::vector<double> breakpoints() const {
    std::vector<double> b;
    for (const auto& s : segments_) {
      b.push_back(s.lo);
      b.push_back(s.hi);
    }
    return b;
  }

  /// Integral of the density (atom excluded) over [a, b].
  double integral(double a, double b, QuadOptions opts = {}) const {
    double total = 0.0;
    for (const auto& s : segments_) {
      const double lo = std::max(a, s.lo), hi = std::min(b, s.hi);
      if (hi > lo) total += integrate(s.density, lo, hi, {}, opts);
    }
    return total;
  }

  /// Integral of the density plus the atom.
  double mass(QuadOptions opts = {}) const { return integral(0.0, capacity_.value(), opts) + atom_; }

 private:
  Capacity capacity_;
  std::vector<DensitySegment> segments_;
  double atom_;
};

/// Branch of W used for the exponent at normalized threshold delta: minus_one
/// for delta <= 1, principal for delta > 1.
inline WBranch exponent_branch(double delta) { return delta <= 1.0 ? WBranch::minus_one : WBranch::principal; }

/**
 * Nontrivial root y = s M of lambda e^{s M} = lambda + s, i.e.
 * y = -delta - W_j(-delta e^{-delta}). Zero at delta = 1, negative above it,
 * positive below it.
 */
inline double normalized_exponent(double delta) {
  if (!(delta > 0) || !std::isfinite(delta)) throw PreconditionError("delta must be finite and > 0");
  if (std::abs(delta - 1.0) <= 4 * std::numeric_limits<double>::epsilon()) return 0.0;
  return -delta - lambert_w(exponent_branch(delta), -delta * std::exp(-delta));
}

/// p < 0 of the infinite-buffer density -p e^{p x}; requires delta = lambda M > 1.
inline double infinite_exponent(double rate, double m) {
  const double delta = rate * m;
  if (!(delta > 1.0))
    throw RegimeError("infinite buffer has no stationary law for delta <= 1 (delta = " + std::to_string(delta) + ")");
  return normalized_exponent(delta) / m;
}

/// Infinite-buffer limiting law g(x) = -p e^{p x} for exponential harvest.
inline LimitingDistribution infinite_exact(double rate, double m) {
  const double p = infinite_exponent(rate, m);
  return LimitingDistribution(Capacity::infinite(),
                              {{0.0, std::numeric_limits<double>::infinity(),
                                [p](double x) { return -p * std::exp(p * x); }}},
                              0.0);
}

namespace detail {

/// Section n of the exact law scaled by `atom`, evaluated in wide precision
/// once at interpolation nodes and in double afterwards.
inline std::function<double(double)> section_density(const StripeSums& sums, int n, const wide& atom) {
  auto exact = [&sums, n, &atom](double x) { return static_cast<double>(atom * sums.density_over_atom(n, x)); };
  auto fit = std::make_shared<const ChebInterpolant>(fit_chebyshev(exact, sums.section_lo(n), sums.section_hi(n)));
  return [fit](double x) { return (*fit)(x); };
}

}  // namespace detail

/// pi(K), the probability of a full buffer, for exponential harvest.
inline double exact_atom(double rate, double m, double k) {
  const detail::StripeSums sums(rate, m, k);
  return static_cast<double>(1 / sums.inverse_atom());
}

/**
 * Exact finite-buffer limiting law for exponential harvest with rate lambda,
 * threshold M and capacity K: one polynomial-exponential density per section
 * of width M below K, plus the atom pi(K).
 *
 * Throws NumericError if the assembled law misses unit mass by more than 1e-9.
 */
inline LimitingDistribution finite_exact(double rate, double m, double k) {
  const detail::StripeSums sums(rate, m, k);
  const detail::wide inv_atom = sums.inverse_atom();
  const double atom = static_cast<double>(1 / inv_atom);
  std::vector<DensitySegment> segs;
  for (int n = 0; n <= sums.last_section(); ++n) {
    const double lo = sums.section_lo(n), hi = sums.section_hi(n);
    if (!(hi > lo)) continue;
    segs.push_back({lo, hi, detail::section_density(sums, n, 1 / inv_atom)});
  }
  LimitingDistribution dist(Capacity::finite(k), std::move(segs), atom);
  for (const auto& s : dist.segments())
    if (!(s.density(s.lo) >= 0.0)) throw NumericError("finite_exact: negative density; evaluation lost precision");
  const double mass = dist.mass();
  if (!(std::abs(mass - 1.0) <= 1e-9))
    throw NumericError("finite_exact: mass check failed (" + format_double(mass) + ")");
  return dist;
}

/// Parameters of the exponential-type approximation c e^{d x}.
struct ApproxParams {
  double c = 0.0;      // density scale
  double d = 0.0;      // exponent rate
  double atom = 0.0;   // approximate pi(K)
  int n_c = 2;         // sections kept exact
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  WBranch branch = WBranch::principal;
};

struct ApproxResult {
  ApproxParams params;
  LimitingDistribution dist;
  bool tight = true;  // false when K < 3M
};

namespace detail {

inline ApproxParams approx_params(const StripeSums& sums, int n_c) {
  if (n_c < 1) throw PreconditionError("n_c must be >= 1");
  if (sums.whole_sections() < n_c) throw PreconditionError("finite_approx needs K >= n_c M");
  const double rate = sums.rate(), m = sums.threshold(), k = sums.capacity();
  const double delta = rate * m;
  ApproxParams p;
  p.n_c = n_c;
  p.branch = exponent_branch(delta);
  p.d = normalized_exponent(delta) / m;
  p.sigma1 = static_cast<double>(sums.sigma1());
  const double span = k - n_c * m;
  p.sigma2 = p.d == 0.0 ? rate * p.sigma1 * span : rate * p.sigma1 * std::expm1(p.d * span) / p.d;
  wide inv = wide(1) + p.sigma2;
  for (int n = 0; n < n_c; ++n) inv += sums.section_mass_over_atom(n);
  p.atom = static_cast<double>(1 / inv);
  p.c = p.atom * rate * p.sigma1;
  return p;
}

}  // namespace detail

/// Parameters of the exponential-type approximation without assembling the law.
inline ApproxParams approx_params(double rate, double m, double k, int n_c = 2) {
  return detail::approx_params(detail::StripeSums(rate, m, k), n_c);
}

/**
 * Exponential-type approximation of the finite-buffer law: c e^{d x} on
 * [0, K - n_c M), the top n_c exact sections rescaled by pi~(K)/pi(K), and
 * the atom pi~(K) chosen for unit mass. Requires K >= n_c M.
 */
inline ApproxResult finite_approx(double rate, double m, double k, int n_c = 2) {
  const detail::StripeSums sums(rate, m, k);
  const ApproxParams p = detail::approx_params(sums, n_c);
  const double span = k - n_c * m;
  std::vector<DensitySegment> segs;
  if (span > 0) segs.push_back({0.0, span, [c = p.c, d = p.d](double x) { return c * std::exp(d * x); }});
  for (int n = 0; n < n_c; ++n)
    segs.push_back({sums.section_lo(n), sums.section_hi(n), detail::section_density(sums, n, detail::wide(p.atom))});
  return {p, LimitingDistribution(Capacity::finite(k), std::move(segs), p.atom), k >= 3.0 * m};
}

struct ErrorPoint {
  double x = 0.0;
  double error = 0.0;     // g(x) - g~(x)
  double relative = 0.0;  // error / g(x)
};

/**
 * Pointwise error of the approximation on [0, M] for K = l M, evaluated with
 * the closed form
 *   e(x) = pi A(x) [sum_q S_q(x) - sum_q S_q(0) e^{-W x / M} R],
 *   R = (1 + sum_{n<l} C_n) / (1 + Sigma_2 + sum_{n<n_c} C_n),
 * rather than by subtracting the two densities.
 */
inline std::vector<ErrorPoint> approx_error_profile(double rate, double m, double k, int n_c,
                                                    const std::vector<double>& grid) {
  using detail::wide;
  const double ratio = k / m;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
    throw PreconditionError("approx_error_profile needs K to be an integer multiple of M");
  const detail::StripeSums sums(rate, m, k);
  const int l = sums.whole_sections();
  if (l < n_c + 1) throw PreconditionError("approx_error_profile needs K >= (n_c + 1) M");
  const double delta = rate * m;
  const double w = delta == 1.0 ? -1.0 : lambert_w(exponent_branch(delta), -delta * std::exp(-delta));
  const double d = (-delta - w) / m;

  wide s0 = 0;
  for (int q = 0; q < l; ++q) s0 += sums.summand(q, 0.0);
  const wide sigma1 = exp(wide(rate) * wide(k)) * s0;
  const double span = k - n_c * m;
  const wide sigma2 = d == 0.0 ? wide(rate) * sigma1 * span : wide(rate) * sigma1 * std::expm1(d * span) / d;
  wide all = 1, head = 1 + sigma2;
  for (int n = 0; n < l; ++n) {
    const wide c = sums.section_mass_over_atom(n);
    all += c;
    if (n < n_c) head += c;
  }
  const wide ratio_r = all / head;
  const wide atom = 1 / sums.inverse_atom();

  std::vector<ErrorPoint> out;
  out.reserve(grid.size());
  for (double x : grid) {
    if (x < 0 || x > m) throw PreconditionError("approx_error_profile grid must lie in [0, M]");
    wide sx = 0;
    for (int q = 0; q < l; ++q) sx += sums.summand(q, x);
    const wide a = wide(rate) * exp(-wide(rate) * (wide(x) - wide(k)));
    const wide e = atom * a * (sx - s0 * exp(wide(-w * x / m)) * ratio_r);
    const wide g = atom * a * sx;
    out.push_back({x, static_cast<double>(e), static_cast<double>(e / g)});
  }
  return out;
}

/**
 * Largest violation of the stationarity equations by `dist` on `grid`.
 *
 * Infinite buffer: g(x) = f(x) int_0^M g + int_M^{M+x} f(x-u+M) g(u) du.
 * Finite buffer: the same below K - M; on [K - M, K) the upper limit is K and
 * pi(K) f(x - K + M) is added; the atom must satisfy
 *   pi(K) (1 - Fbar(M)) = Fbar(K) int_0^M g + int_M^K Fbar(K-u+M) g(u) du.
 * Integrals use adaptive quadrature split at the segment boundaries.
 */
inline double integral_residual(const LimitingDistribution& dist, const HarvestModel& harvest, double m,
                                const std::vector<double>& grid) {
  const Capacity cap = dist.capacity();
  const double k = cap.value();
  std::vector<double> brk = dist.breakpoints();
  const QuadOptions opts{1e-12, 16};
  auto g_int = [&](auto&& kernel, double a, double b) {
    if (!(b > a)) return 0.0;
    return integrate([&](double u) { return kernel(u) * dist.density(u); }, a, b, brk, opts);
  };
  const double low_mass = dist.integral(0.0, std::min(m, k), opts);
  double worst = 0.0;
  for (double x : grid) {
    double rhs = harvest.pdf(x) * low_mass;
    auto kern = [&](double u) { return harvest.pdf(x - u + m); };
    if (!cap.is_finite() || x < k - m) {
      rhs += g_int(kern, m, m + x);
    } else {
      rhs += g_int(kern, m, k) + dist.atom() * harvest.pdf(x - k + m);
    }
    worst = std::max(worst, std::abs(dist.density(x) - rhs));
  }
  if (cap.is_finite()) {
    const double num = harvest.ccdf(k) * low_mass + g_int([&](double u) { return harvest.ccdf(k - u + m); }, m, k);
    worst = std::max(worst, std::abs(dist.atom() - num / (1.0 - harvest.ccdf(m))));
  }
  return worst;
}

namespace detail {

/// Cell edges on [0, K] containing every j M and K - j M, with about n cells.
inline std::vector<double> collocation_edges(double m, double k, std::size_t n) {
  std::vector<double> brk{0.0, k};
  for (int j = 1; j * m < k; ++j) {
    brk.push_back(j * m);
    brk.push_back(k - j * m);
  }
  std::sort(brk.begin(), brk.end());
  std::vector<double> edges{0.0};
  for (std::size_t i = 0; i + 1 < brk.size(); ++i) {
    const double lo = brk[i], hi = brk[i + 1];
    if (hi - lo <= 1e-12 * k) continue;
    const auto cells = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround((hi - lo) / k * n)));
    for (std::size_t c = 1; c <= cells; ++c) edges.push_back(lo + (hi - lo) * c / cells);
  }
  edges.back() = k;
  return edges;
}

}  // namespace detail

/**
 * Numerical solution of the finite-buffer stationarity equations for any
 * harvest law with an infinite positive tail.
 *
 * The density is piecewise constant on a grid of about n_grid cells whose
 * edges include every multiple of M and every K - j M. Each equation is
 * collocated at the cell midpoints; kernel integrals over a cell are exact via
 * the ccdf. Unknowns are the cell values and the atom. The last collocation
 * row is replaced by the unit-mass condition.
 */
inline LimitingDistribution solve_integral_equation(const HarvestModel& harvest, double m, double k,
                                                    std::size_t n_grid) {
  if (!(m > 0 && k > 0)) throw PreconditionError("solve_integral_equation needs M, K > 0");
  if (n_grid < 4) throw PreconditionError("n_grid must be >= 4");
  if (!(harvest.ccdf(k) > 0)) throw PreconditionError("harvest law must have an infinite positive tail");

  const std::vector<double> edges = detail::collocation_edges(m, k, n_grid);
  const std::size_t n = edges.size() - 1;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, n + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);

  std::vector<double> low_overlap(n);
  for (std::size_t j = 0; j < n; ++j)
    low_overlap[j] = std::clamp(std::min(edges[j + 1], m) - edges[j], 0.0, edges[j + 1] - edges[j]);

  // int_{lo}^{hi} f(x - u + M) du = Fbar(x - hi + M) - Fbar(x - lo + M)
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 0.5 * (edges[i] + edges[i + 1]);
    const double fx = harvest.pdf(x);
    const double top = std::min(m + x, k);
    for (std::size_t j = 0; j < n; ++j) {
      double kern = fx * low_overlap[j];
      const double lo = std::max(edges[j], m), hi = std::min(edges[j + 1], top);
      if (hi > lo) kern += harvest.ccdf(x - hi + m) - harvest.ccdf(x - lo + m);
      a(i, j) = -kern;
    }
    a(i, i) += 1.0;
    if (x >= k - m) a(i, n) = -harvest.pdf(x - k + m);
  }

  using gauss = boost::math::quadrature::gauss<double, 8>;
  for (std::size_t j = 0; j < n; ++j) {
    double v = harvest.ccdf(k) * low_overlap[j];
    const double lo = std::max(edges[j], m), hi = std::max(edges[j + 1], m);
    if (hi > lo) v += gauss::integrate([&](double u) { return harvest.ccdf(k - u + m); }, lo, hi);
    a(n, j) = -v;
  }
  a(n, n) = 1.0 - harvest.ccdf(m);

  a.row(n - 1).setZero();
  for (std::size_t j = 0; j < n; ++j) a(n - 1, j) = edges[j + 1] - edges[j];
  a(n - 1, n) = 1.0;
  rhs(n - 1) = 1.0;

  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const Eigen::VectorXd sol = lu.solve(rhs);
  if (!sol.allFinite() || (a * sol - rhs).lpNorm<Eigen::Infinity>() > 1e-8)
    throw NumericError("solve_integral_equation: singular system; refine the grid (n_grid = " +
                       std::to_string(n_grid) + ")");

  std::vector<DensitySegment> segs;
  segs.reserve(n);
  double mass = sol(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double v = sol(j);
    mass += v * (edges[j + 1] - edges[j]);
    segs.push_back({edges[j], edges[j + 1], [v](double) { return v; }});
  }
  if (std::abs(mass - 1.0) > 1e-8) throw NumericError("solve_integral_equation: mass check failed");
  return LimitingDistribution(Capacity::finite(k), std::move(segs), sol(n));
}

/// Writes "x,density" rows sampling each segment at both ends, then an
/// "atom_at_K,<mass>" record. Half-line laws are cut where the density falls
/// below 1e-12 of its value at 0.
inline void write_distribution_csv(std::ostream& os, const LimitingDistribution& dist, std::size_t points = 2000) {
  os << "x,density\n";
  double top = dist.capacity().value();
  if (!dist.capacity().is_finite()) {
    top = 1.0;
    const double g0 = dist.density(0.0);
    while (dist.density(top) > 1e-12 * g0 && top < 1e300) top *= 2.0;
  }
  for (const auto& s : dist.segments()) {
    const double lo = s.lo, hi = std::min(s.hi, top);
    if (!(hi > lo)) continue;
    const auto cnt = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(points * (hi - lo) / top)) + 1);
    for (std::size_t i = 0; i < cnt; ++i) {
      const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cnt - 1);
      os << format_double(x) << ',' << format_double(s.density(x)) << '\n';
    }
  }
  os << "atom_at_K," << format_double(dist.atom()) << '\n';
}

}  // namespace ehlab
