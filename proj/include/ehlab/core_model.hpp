#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>

#include "ehlab/errors.hpp"
#include "ehlab/quadrature.hpp"

namespace ehlab {

inline constexpr double kBoltzmann = 1.380649e-23;    // J/K
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kMicro = 1e-6;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

/// Storage capacity: a positive finite energy or unbounded.
class Capacity {
 public:
  static Capacity finite(double k) {
    if (!(k > 0) || !std::isfinite(k)) throw PreconditionError("capacity must be finite and > 0");
    return Capacity(k);
  }
  static Capacity infinite() { return Capacity(std::numeric_limits<double>::infinity()); }

  bool is_finite() const { return std::isfinite(value_); }
  double value() const { return value_; }
  Capacity scaled(double s) const { return is_finite() ? finite(value_ * s) : *this; }

  friend bool operator==(const Capacity&, const Capacity&) = default;

 private:
  explicit Capacity(double v) : value_(v) {}
  double value_;
};

/**
 * I.i.d. per-slot harvested energy X(i).
 *
 * Either exponential (Rayleigh-faded downlink) or a user-supplied law given by
 * its pdf, ccdf and mean. Custom laws are checked on construction: the pdf must
 * integrate to one and the ccdf must run from one down to zero.
 */
class HarvestModel {
 public:
  enum class Kind { exponential, custom };
  using Fn = std::function<double(double)>;

  static HarvestModel exponential(double rate) {
    if (!(rate > 0) || !std::isfinite(rate)) throw PreconditionError("harvest rate must be > 0");
    HarvestModel m;
    m.kind_ = Kind::exponential;
    m.mean_ = 1.0 / rate;
    m.rate_ = rate;
    return m;
  }

  static HarvestModel exponential_with_mean(double mean) { return exponential(1.0 / mean); }

  /// `quantile` is optional; without it sampling inverts the ccdf by bisection.
  static HarvestModel custom(Fn pdf, Fn ccdf, double mean, Fn quantile = {}) {
    if (!pdf || !ccdf) throw PreconditionError("custom harvest needs pdf and ccdf");
    if (!(mean > 0) || !std::isfinite(mean)) throw PreconditionError("harvest mean must be > 0");
    HarvestModel m;
    m.kind_ = Kind::custom;
    m.mean_ = mean;
    m.rate_ = 1.0 / mean;
    m.pdf_ = std::make_shared<const Fn>(std::move(pdf));
    m.ccdf_ = std::make_shared<const Fn>(std::move(ccdf));
    if (quantile) m.quantile_ = std::make_shared<const Fn>(std::move(quantile));
    m.validate_custom();
    return m;
  }

  Kind kind() const { return kind_; }
  bool is_exponential() const { return kind_ == Kind::exponential; }
  double mean() const { return mean_; }
  /// 1 / mean; the exponential rate for exponential laws.
  double rate() const { return rate_; }

  double pdf(double x) const {
    if (x < 0) return 0.0;
    return is_exponential() ? rate_ * std::exp(-rate_ * x) : (*pdf_)(x);
  }

  double ccdf(double x) const {
    if (x <= 0) return 1.0;
    return is_exponential() ? std::exp(-rate_ * x) : (*ccdf_)(x);
  }

  /// Smallest x with P(X <= x) >= u, for u in (0, 1).
  double quantile(double u) const {
    if (is_exponential()) return -std::log1p(-u) / rate_;
    if (quantile_) return (*quantile_)(u);
    const double target = 1.0 - u;
    double lo = 0.0, hi = mean_;
    while (ccdf(hi) > target) {
      lo = hi;
      hi *= 2.0;
      if (!std::isfinite(hi)) throw NumericError("harvest quantile: ccdf does not vanish");
    }
    for (int i = 0; i < 80 && hi - lo > 1e-15 * hi; ++i) {
      const double mid = 0.5 * (lo + hi);
      (ccdf(mid) > target ? lo : hi) = mid;
    }
    return hi;
  }

  /// Law of beta * X: pdf (1/beta) f(x/beta).
  HarvestModel scaled(double beta) const {
    if (!(beta > 0)) throw PreconditionError("scale factor must be > 0");
    if (beta == 1.0) return *this;
    if (is_exponential()) return exponential(rate_ / beta);
    HarvestModel m = *this;
    m.mean_ = mean_ * beta;
    m.rate_ = 1.0 / m.mean_;
    auto pdf = pdf_;
    auto ccdf = ccdf_;
    m.pdf_ = std::make_shared<const Fn>([pdf, beta](double x) { return (*pdf)(x / beta) / beta; });
    m.ccdf_ = std::make_shared<const Fn>([ccdf, beta](double x) { return (*ccdf)(x / beta); });
    if (quantile_) {
      auto q = quantile_;
      m.quantile_ = std::make_shared<const Fn>([q, beta](double u) { return beta * (*q)(u); });
    }
    return m;
  }

 private:
  HarvestModel() = default;

  void validate_custom() const {
    const double inf = std::numeric_limits<double>::infinity();
    const std::vector<double> brk{0.5 * mean_, mean_, 2 * mean_, 5 * mean_, 20 * mean_};
    const double mass = integrate([this](double x) { return (*pdf_)(x); }, 0.0, inf, brk, {1e-10, 15});
    if (std::abs(mass - 1.0) > 1e-6)
      throw PreconditionError("custom harvest pdf integrates to " + std::to_string(mass));
    if (std::abs((*ccdf_)(0.0) - 1.0) > 1e-6) throw PreconditionError("custom harvest ccdf(0) != 1");
    double prev = 1.0;
    for (int i = 0; i <= 400; ++i) {
      const double x = mean_ * i / 20.0;
      const double c = (*ccdf_)(x);
      if (c > prev + 1e-12 || c < 0) throw PreconditionError("custom harvest ccdf not non-increasing");
      prev = c;
    }
    if ((*ccdf_)(1e6 * mean_) > 1e-6) throw PreconditionError("custom harvest ccdf does not vanish");
  }

  Kind kind_ = Kind::exponential;
  double mean_ = 1.0;
  double rate_ = 1.0;
  std::shared_ptr<const Fn> pdf_, ccdf_, quantile_;
};

/// Downlink wireless power transfer parameters.
struct Downlink {
  double p_dl = 1.0;      // W
  double eta = 0.7;       // RF-to-DC efficiency
  double omega_dl = 0.0;  // mean channel power gain

  double mean_harvest() const { return eta * p_dl * omega_dl; }
};

/// Transmission policy and plant parameters. Energies are in joules per slot.
struct SystemSpec {
  double m_desired = 0.0;  // desired UL power M
  Capacity capacity = Capacity::infinite();
  double alpha = 1.0;      // amplifier inefficiency
  double beta = 1.0;       // storage efficiency
  double p_circuit = 0.0;  // P_ct
  double p_leak = 0.0;     // P_l
  std::optional<Downlink> downlink;

  double p_constant() const { return p_circuit + p_leak; }

  void validate() const {
    if (!(m_desired > 0)) throw PreconditionError("desired power M must be > 0");
    if (!(alpha >= 1.0)) throw PreconditionError("alpha must be >= 1");
    if (!(beta > 0 && beta <= 1.0)) throw PreconditionError("beta must lie in (0, 1]");
    if (p_circuit < 0 || p_leak < 0) throw PreconditionError("constant power terms must be >= 0");
    if (downlink && !(downlink->eta > 0 && downlink->eta <= 1.0))
      throw PreconditionError("eta must lie in (0, 1]");
  }
};

/// The ideal-system parameters an imperfect system reduces to.
struct EffectiveSpec {
  double threshold = 0.0;  // M~ = P_C + alpha M
  HarvestModel harvest = HarvestModel::exponential(1.0);
  Capacity capacity = Capacity::infinite();

  /// delta = M~ / E[X~]; equals lambda~ M~ for exponential harvest.
  double delta() const { return threshold / harvest.mean(); }
};

/// Ideal system with the given harvest law, threshold and capacity.
inline EffectiveSpec ideal_spec(HarvestModel harvest, double threshold, Capacity capacity) {
  if (!(threshold >= 0)) throw PreconditionError("threshold must be >= 0");
  return EffectiveSpec{threshold, std::move(harvest), capacity};
}

/// Maps a non-ideal system onto the ideal storage equation: M -> P_C + alpha M
/// and f(x) -> (1/beta) f(x/beta).
inline EffectiveSpec effective_spec(const SystemSpec& spec, const HarvestModel& harvest) {
  spec.validate();
  return EffectiveSpec{spec.p_constant() + spec.alpha * spec.m_desired, harvest.scaled(spec.beta),
                       spec.capacity};
}

/// Desired UL power M whose effective threshold P_C + alpha M equals m_effective.
inline double desired_power(double m_effective, const SystemSpec& spec) {
  const double m = (m_effective - spec.p_constant()) / spec.alpha;
  if (!(m > 0)) throw PreconditionError("effective threshold does not exceed the constant power draw");
  return m;
}

/// Uplink channel and modulation: P_e(gamma) = a Q(sqrt(b gamma)).
struct LinkModel {
  double omega_ul = 1.0;     // mean UL channel power gain
  double noise_power = 1.0;  // W
  double mod_a = 1.0;
  double mod_b = 2.0;
  double gamma_thr = 1.0;  // 2^R0 - 1

  static double threshold_for_rate(double r0) { return std::exp2(r0) - 1.0; }
  static double rate_for_threshold(double gamma_thr) { return std::log2(1.0 + gamma_thr); }

  void validate() const {
    if (!(mod_a > 0 && mod_b > 0)) throw PreconditionError("modulation constants must be > 0");
    if (!(noise_power > 0)) throw PreconditionError("noise power must be > 0");
    if (!(gamma_thr >= 0)) throw PreconditionError("SNR threshold must be >= 0");
  }
};

/// gamma_bar = Omega_UL * E[X] / sigma_n^2.
inline double normalized_snr(const LinkModel& link, double mean_harvest) {
  if (!(link.noise_power > 0)) throw PreconditionError("noise power must be > 0");
  return link.omega_ul * mean_harvest / link.noise_power;
}

inline double normalized_snr(const LinkModel& link, const HarvestModel& harvest) {
  return normalized_snr(link, harvest.mean());
}

namespace link_budget {

/// G_t G_r (c / (4 pi f d))^n.
inline double channel_gain(double freq_hz, double distance_m, double gain_tx_dbi, double gain_rx_dbi,
                           double exponent) {
  const double wavelength = kSpeedOfLight / freq_hz;
  return db_to_linear(gain_tx_dbi + gain_rx_dbi) *
         std::pow(wavelength / (4.0 * std::numbers::pi * distance_m), exponent);
}

/// k_B T_e BW with T_e = T0 (F - 1).
inline double noise_power(double bandwidth_hz, double noise_figure_db, double t0_kelvin = 300.0) {
  return kBoltzmann * t0_kelvin * (db_to_linear(noise_figure_db) - 1.0) * bandwidth_hz;
}

}  // namespace link_budget

}  // namespace ehlab
