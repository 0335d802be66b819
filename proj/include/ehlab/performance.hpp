#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ehlab/chain_sim.hpp"
#include "ehlab/core_model.hpp"
#include "ehlab/errors.hpp"
#include "ehlab/limiting_dist.hpp"
#include "ehlab/quadrature.hpp"
#include "ehlab/stats.hpp"

namespace ehlab {

enum class Metric { aer, outage };

inline const char* metric_name(Metric m) { return m == Metric::aer ? "aer" : "outage"; }

/**
 * Law of the UL power in units where the mean harvest is 1: density
 * c_over_rate e^{d_over_rate x} on [0, delta) and mass 1 - c_over_rate at delta.
 * c_over_rate = 0 is the constant-power policy.
 */
struct PowerLaw {
  double c_over_rate = 0.0;
  double d_over_rate = 0.0;

  double p_m() const { return 1.0 - c_over_rate; }
};

namespace detail {

/// 1 - sqrt(y / (2 + y)) without cancellation for large y.
inline double one_minus_s(double y) { return (2.0 / (2.0 + y)) / (1.0 + std::sqrt(y / (2.0 + y))); }

inline void check_operating_point(double gamma_bar, double delta) {
  if (!(gamma_bar > 0) || !std::isfinite(gamma_bar)) throw PreconditionError("gamma_bar must be finite and > 0");
  if (!(delta > 0) || !std::isfinite(delta)) throw PreconditionError("delta must be finite and > 0");
}

// Quadrature over [0, delta] of h(x) e^{(d/lambda) x}; the breakpoints resolve the
// SNR knee near x ~ 1 / gamma_bar.
template <class H>
double weighted_integral(H&& h, const PowerLaw& law, double delta, double knee) {
  return integrate([&](double x) { return h(x) * std::exp(law.d_over_rate * x); }, 0.0, delta,
                   geometric_breaks(knee, delta), {1e-10, 15});
}

}  // namespace detail

/// Constant-power AER (a/2)[1 - sqrt(b g d / (2 + b g d))], g = gamma_bar, d = delta.
inline double aer_infinite(double a, double b, double gamma_bar, double delta) {
  detail::check_operating_point(gamma_bar, delta);
  return 0.5 * a * detail::one_minus_s(b * gamma_bar * delta);
}

/// Constant-power outage 1 - e^{-gamma_thr / (delta gamma_bar)}.
inline double outage_infinite(double gamma_thr, double gamma_bar, double delta) {
  detail::check_operating_point(gamma_bar, delta);
  if (gamma_thr < 0) throw PreconditionError("gamma_thr must be >= 0");
  return -std::expm1(-gamma_thr / (delta * gamma_bar));
}

/// AER when the normalized UL power follows `law` on [0, delta].
inline double aer_finite(double a, double b, double gamma_bar, double delta, const PowerLaw& law) {
  detail::check_operating_point(gamma_bar, delta);
  const double y = b * gamma_bar;
  const double spread =
      detail::weighted_integral([y](double x) { return detail::one_minus_s(y * x); }, law, delta, 1.0 / y);
  return 0.5 * a * (law.p_m() * detail::one_minus_s(y * delta) + law.c_over_rate * spread);
}

/// Outage when the normalized UL power follows `law`; zero power is always in outage.
inline double outage_finite(double gamma_thr, double gamma_bar, double delta, const PowerLaw& law) {
  detail::check_operating_point(gamma_bar, delta);
  if (gamma_thr < 0) throw PreconditionError("gamma_thr must be >= 0");
  const double tau = gamma_thr / gamma_bar;
  const double spread = detail::weighted_integral(
      [tau](double x) { return x > 0 ? -std::expm1(-tau / x) : 1.0; }, law, delta, std::max(tau, 1e-300));
  return law.p_m() * -std::expm1(-tau / delta) + law.c_over_rate * spread;
}

/// PowerLaw of the exponential-type approximation for a buffer with rate lambda.
inline PowerLaw power_law(const ApproxParams& p, double rate) { return {p.c / rate, p.d / rate}; }

inline double aer_finite(const LinkModel& link, const ApproxParams& approx, double rate, double delta) {
  return aer_finite(link.mod_a, link.mod_b, normalized_snr(link, 1.0 / rate), delta, power_law(approx, rate));
}

inline double outage_finite(const LinkModel& link, const ApproxParams& approx, double rate, double delta) {
  return outage_finite(link.gamma_thr, normalized_snr(link, 1.0 / rate), delta, power_law(approx, rate));
}

/**
 * UL power law used by the closed forms, in units of the mean harvest:
 *   finite K:           exponential-type approximation with n_c exact sections;
 *   K = inf, delta > 1: c = -p, d = p;
 *   K = inf, delta <= 1: constant power M.
 */
inline PowerLaw closed_form_law(double delta, Capacity k_norm, int n_c = 2) {
  if (!k_norm.is_finite()) {
    if (delta <= 1.0) return {};
    const double p = normalized_exponent(delta) / delta;
    return {-p, p};
  }
  const ApproxParams p = approx_params(1.0, delta, k_norm.value(), n_c);
  return {p.c, p.d};
}

/// Closed-form metric at normalized SNR gamma_bar and normalized threshold delta.
inline double closed_form(Metric metric, const LinkModel& link, double gamma_bar, double delta, Capacity k_norm,
                          int n_c = 2) {
  const PowerLaw law = closed_form_law(delta, k_norm, n_c);
  if (metric == Metric::aer) return aer_finite(link.mod_a, link.mod_b, gamma_bar, delta, law);
  return outage_finite(link.gamma_thr, gamma_bar, delta, law);
}

/**
 * Semi-analytic Monte Carlo: runs the storage chain of `spec` and averages the
 * per-slot metric conditioned on gamma_i = min(B(i), M) Omega_UL / sigma_n^2,
 * with the Rayleigh fade integrated out. Standard errors are batch means.
 */
inline Estimate mc_metric(Metric metric, const EffectiveSpec& spec, const LinkModel& link, const RunControl& rc) {
  link.validate();
  rc.validate(spec.capacity);
  SlotRng rng(rc.seed);
  const double m = spec.threshold;
  const double snr_per_joule = link.omega_ul / link.noise_power;
  BatchMeans acc(rc.n_slots - rc.burn_in);
  auto per_slot = [&](double p_ul) {
    const double g = p_ul * snr_per_joule;
    if (metric == Metric::aer) return 0.5 * link.mod_a * detail::one_minus_s(link.mod_b * g);
    return g > 0 ? -std::expm1(-link.gamma_thr / g) : 1.0;
  };
  detail::run_storage(
      m, spec.capacity, rc.initial, rc.n_slots, [&] { return rng.harvest(spec.harvest); },
      [&](std::uint64_t i, double b, bool) {
        if (i >= rc.burn_in) acc.add(per_slot(ul_power(b, m)));
      });
  return acc.result();
}

inline Estimate mc_aer(const EffectiveSpec& spec, const LinkModel& link, const RunControl& rc) {
  return mc_metric(Metric::aer, spec, link, rc);
}

inline Estimate mc_outage(const EffectiveSpec& spec, const LinkModel& link, const RunControl& rc) {
  return mc_metric(Metric::outage, spec, link, rc);
}

/// delta = 0.05, 0.10, ..., 1.70.
inline std::vector<double> default_delta_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 34; ++i) g.push_back(0.05 * i);
  return g;
}

struct DeltaChoice {
  double delta = 0.0;
  double value = 0.0;
};

/// Grid argmin of the closed-form metric; ties go to the smaller delta.
inline DeltaChoice optimize_delta(Metric metric, const LinkModel& link, double gamma_bar, Capacity k_norm,
                                  std::span<const double> grid, int n_c = 2) {
  if (grid.empty()) throw PreconditionError("optimize_delta: empty grid");
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  DeltaChoice best{sorted.front(), std::numeric_limits<double>::infinity()};
  for (double d : sorted) {
    if (!(d > 0)) throw PreconditionError("optimize_delta: grid must be positive");
    const double v = closed_form(metric, link, gamma_bar, d, k_norm, n_c);
    if (v < best.value) best = {d, v};
  }
  return best;
}

/**
 * -d log10(metric) / d log10(gamma_bar) between two SNRs in dB, from the
 * closed forms. With no fixed delta each endpoint uses its own grid optimum.
 */
inline double diversity_slope(Metric metric, const LinkModel& link, Capacity k_norm, double lo_db, double hi_db,
                              std::optional<double> delta = std::nullopt,
                              std::span<const double> grid = {}, int n_c = 2) {
  if (!(hi_db >= lo_db + 10.0)) throw PreconditionError("diversity_slope needs hi_db >= lo_db + 10");
  const std::vector<double> fallback = default_delta_grid();
  if (grid.empty()) grid = fallback;
  auto value = [&](double db) {
    const double g = db_to_linear(db);
    return delta ? closed_form(metric, link, g, *delta, k_norm, n_c)
                 : optimize_delta(metric, link, g, k_norm, grid, n_c).value;
  };
  return -(std::log10(value(hi_db)) - std::log10(value(lo_db))) / ((hi_db - lo_db) / 10.0);
}

/**
 * High-SNR forms with the spread term cut off at eps: the 1/x integrand of the
 * asymptotic expansions diverges logarithmically at 0, so these are
 * diagnostics whose value depends on eps (default delta * 1e-6).
 */
inline double aer_asymptotic(double a, double b, double gamma_bar, double delta, const PowerLaw& law,
                             std::optional<double> eps = std::nullopt) {
  detail::check_operating_point(gamma_bar, delta);
  const double cut = eps.value_or(delta * 1e-6);
  const double spread =
      integrate([&](double x) { return std::exp(law.d_over_rate * x) / x; }, cut, delta, geometric_breaks(cut, delta));
  return a * law.c_over_rate / (2 * b * gamma_bar) * spread + law.p_m() * a / (2 * b * delta * gamma_bar);
}

inline double outage_asymptotic(double gamma_thr, double gamma_bar, double delta, const PowerLaw& law,
                                std::optional<double> eps = std::nullopt) {
  detail::check_operating_point(gamma_bar, delta);
  const double cut = eps.value_or(delta * 1e-6);
  const double spread =
      integrate([&](double x) { return std::exp(law.d_over_rate * x) / x; }, cut, delta, geometric_breaks(cut, delta));
  return law.p_m() * gamma_thr / (gamma_bar * delta) + law.c_over_rate * gamma_thr / gamma_bar * spread;
}

}  // namespace ehlab
