#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ehlab/core_model.hpp"
#include "ehlab/errors.hpp"
#include "ehlab/stats.hpp"

namespace ehlab {

/// Per-run random source; uniforms are built from the top 53 bits so the
/// stream is identical on every platform.
class SlotRng {
 public:
  explicit SlotRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double harvest(const HarvestModel& h) { return h.quantile(uniform()); }

 private:
  std::mt19937_64 engine_;
};

/// P_UL = min(B, M).
inline double ul_power(double level, double m) { return std::min(level, m); }

/// B(i+1) = min([B(i) - M]^+ + X(i), K).
inline double step(double level, double harvested, double m, Capacity k) {
  return std::min(std::max(level - m, 0.0) + harvested, k.value());
}

struct RunControl {
  std::uint64_t n_slots = 1'000'000;  // total slots, burn-in included
  std::uint64_t burn_in = 10'000;
  std::uint64_t seed = 1;
  double initial = 0.0;
  std::size_t bins = 1000;
  std::uint64_t block = 1000;  // slots per mean_series entry

  void validate(Capacity k) const {
    if (n_slots <= burn_in) throw PreconditionError("n_slots must exceed burn_in");
    if (initial < 0 || initial > k.value()) throw PreconditionError("initial level outside [0, K]");
    if (bins == 0 || block == 0) throw PreconditionError("bins and block must be > 0");
  }
};

/// Binned density estimate on [lo, lo + width * size) plus the mass above it.
struct Histogram {
  double lo = 0.0;
  double width = 0.0;
  std::vector<double> density;
  double overflow = 0.0;

  double mass() const {
    double m = overflow;
    for (double d : density) m += d * width;
    return m;
  }
  double bin_lo(std::size_t i) const { return lo + width * static_cast<double>(i); }
  double bin_mid(std::size_t i) const { return lo + width * (static_cast<double>(i) + 0.5); }

  /// Merges groups of `factor` adjacent bins; size must be divisible by factor.
  Histogram rebinned(std::size_t factor) const {
    if (factor == 0 || density.size() % factor) throw PreconditionError("rebinned: bad factor");
    Histogram h{lo, width * static_cast<double>(factor), {}, overflow};
    for (std::size_t i = 0; i < density.size(); i += factor) {
      double s = 0.0;
      for (std::size_t j = 0; j < factor; ++j) s += density[i + j];
      h.density.push_back(s / static_cast<double>(factor));
    }
    return h;
  }
};

/// Empirical statistics of one simulated trajectory.
struct TrajectoryStats {
  Histogram histogram;
  double atom_mass = 0.0;         // fraction of slots with the capacity clip binding
  double p_m_hat = 0.0;           // fraction of slots with P_UL = M
  double tail_below_m = 0.0;      // fraction of the final 10% of slots with P_UL < M
  double mean_level = 0.0;
  std::vector<double> mean_series;  // per-block mean level after burn-in
  std::uint64_t block = 0;
  std::uint64_t n_slots = 0;
  std::uint64_t burn_in = 0;
  std::uint64_t seed = 0;
  bool finite_capacity = false;
};

namespace detail {

/// Iterates the storage equation for n slots; visit(i, level, clipped) sees
/// B(i) before slot i's harvest is added.
template <class Draw, class Visit>
void run_storage(double m, Capacity k, double initial, std::uint64_t n, Draw&& draw, Visit&& visit) {
  double b = initial;
  bool clipped = k.is_finite() && initial >= k.value();
  for (std::uint64_t i = 0; i < n; ++i) {
    visit(i, b, clipped);
    const double next = std::max(b - m, 0.0) + draw();
    clipped = next >= k.value();
    b = clipped ? k.value() : next;
  }
}

/// Moran dam: Z(i+1) = [min(Z(i) + X(i), K) - M]^+. visit(i, min(U(i), K), clipped)
/// with U(i) = Z(i) + X(i).
template <class Draw, class Visit>
void run_moran(double m, Capacity k, double initial, std::uint64_t n, Draw&& draw, Visit&& visit) {
  double z = initial;
  for (std::uint64_t i = 0; i < n; ++i) {
    const double u = z + draw();
    const bool clipped = u >= k.value();
    const double level = clipped ? k.value() : u;
    visit(i, level, clipped);
    z = std::max(level - m, 0.0);
  }
}

class StatsRecorder {
 public:
  StatsRecorder(double threshold, Capacity k, double harvest_mean, const RunControl& rc)
      : threshold_(threshold), k_(k), rc_(rc), tail_start_(rc.n_slots - rc.n_slots / 10) {
    stats_.finite_capacity = k.is_finite();
    stats_.n_slots = rc.n_slots;
    stats_.burn_in = rc.burn_in;
    stats_.seed = rc.seed;
    stats_.block = rc.block;
    const double range = k.is_finite() ? k.value() : 10.0 * harvest_mean;
    stats_.histogram.width = range / static_cast<double>(rc.bins);
    counts_.assign(rc.bins, 0);
  }

  void record(std::uint64_t i, double level, bool clipped, double p_ul) {
    if (i >= tail_start_ && p_ul < threshold_) ++tail_below_;
    if (i < rc_.burn_in) return;
    ++n_;
    sum_ += level;
    block_sum_ += level;
    if (++in_block_ == rc_.block) {
      stats_.mean_series.push_back(block_sum_ / static_cast<double>(rc_.block));
      block_sum_ = 0.0;
      in_block_ = 0;
    }
    if (p_ul >= threshold_) ++at_m_;
    if (clipped) {
      ++atom_;
      return;
    }
    const auto bin = static_cast<std::size_t>(level / stats_.histogram.width);
    if (bin < counts_.size())
      ++counts_[bin];
    else
      ++overflow_;
  }

  TrajectoryStats finish() {
    const double n = static_cast<double>(n_);
    auto& h = stats_.histogram;
    h.density.resize(counts_.size());
    for (std::size_t i = 0; i < counts_.size(); ++i) h.density[i] = static_cast<double>(counts_[i]) / (n * h.width);
    h.overflow = static_cast<double>(overflow_) / n;
    stats_.atom_mass = static_cast<double>(atom_) / n;
    stats_.p_m_hat = static_cast<double>(at_m_) / n;
    stats_.mean_level = sum_ / n;
    const auto tail = rc_.n_slots - tail_start_;
    stats_.tail_below_m = tail ? static_cast<double>(tail_below_) / static_cast<double>(tail) : 0.0;
    return std::move(stats_);
  }

 private:
  double threshold_;
  Capacity k_;
  RunControl rc_;
  std::uint64_t tail_start_;
  TrajectoryStats stats_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t n_ = 0, atom_ = 0, overflow_ = 0, at_m_ = 0, tail_below_ = 0, in_block_ = 0;
  double sum_ = 0.0, block_sum_ = 0.0;
};

}  // namespace detail

/// Simulates the storage equation on the (effective) ideal system.
inline TrajectoryStats simulate(const EffectiveSpec& spec, const RunControl& rc) {
  rc.validate(spec.capacity);
  SlotRng rng(rc.seed);
  const double m = spec.threshold;
  detail::StatsRecorder rec(m, spec.capacity, spec.harvest.mean(), rc);
  detail::run_storage(
      m, spec.capacity, rc.initial, rc.n_slots, [&] { return rng.harvest(spec.harvest); },
      [&](std::uint64_t i, double b, bool clipped) { rec.record(i, b, clipped, ul_power(b, m)); });
  return rec.finish();
}

/// Simulates Moran's dam and records min(U(i), K), the storage-chain twin.
inline TrajectoryStats simulate_moran(const EffectiveSpec& spec, const RunControl& rc) {
  rc.validate(spec.capacity);
  SlotRng rng(rc.seed);
  const double m = spec.threshold;
  detail::StatsRecorder rec(m, spec.capacity, spec.harvest.mean(), rc);
  detail::run_moran(
      m, spec.capacity, rc.initial, rc.n_slots, [&] { return rng.harvest(spec.harvest); },
      [&](std::uint64_t i, double level, bool clipped) { rec.record(i, level, clipped, ul_power(level, m)); });
  return rec.finish();
}

/// UL power under imperfections: min(M, [(B - P_C) / alpha]^+).
inline double imperfect_ul_power(double level, const SystemSpec& spec) {
  return std::min(spec.m_desired, std::max(level - spec.p_constant(), 0.0) / spec.alpha);
}

/**
 * Simulates the physical buffer with circuit power, amplifier inefficiency,
 * leakage and storage losses:
 *   B(i+1) = min(B(i) - (P_C + alpha P_UL(i)) + beta X(i), K), floored at the
 * energy-neutral [.]^+ when B(i) < P_C. p_m_hat counts slots at full power M.
 */
inline TrajectoryStats simulate_imperfect(const SystemSpec& spec, const HarvestModel& harvest,
                                          const RunControl& rc) {
  spec.validate();
  rc.validate(spec.capacity);
  SlotRng rng(rc.seed);
  const Capacity k = spec.capacity;
  detail::StatsRecorder rec(spec.m_desired, k, spec.beta * harvest.mean(), rc);
  double b = rc.initial;
  bool clipped = k.is_finite() && b >= k.value();
  for (std::uint64_t i = 0; i < rc.n_slots; ++i) {
    const double p_ul = imperfect_ul_power(b, spec);
    rec.record(i, b, clipped, p_ul);
    const double drawn = std::min(b, spec.p_constant() + spec.alpha * p_ul);
    const double next = (b - drawn) + spec.beta * rng.harvest(harvest);
    clipped = next >= k.value();
    b = clipped ? k.value() : next;
  }
  return rec.finish();
}

enum class ChainForm { storage, moran };

/// Levels recorded every `stride` slots after burn_in; n_samples values.
inline std::vector<double> sample_path(const EffectiveSpec& spec, ChainForm form, std::size_t n_samples,
                                       std::uint64_t stride, std::uint64_t burn_in, std::uint64_t seed,
                                       double initial = 0.0) {
  if (stride == 0) throw PreconditionError("stride must be > 0");
  SlotRng rng(seed);
  std::vector<double> out;
  out.reserve(n_samples);
  const std::uint64_t n = burn_in + stride * n_samples;
  auto draw = [&] { return rng.harvest(spec.harvest); };
  auto visit = [&](std::uint64_t i, double level, bool) {
    if (i >= burn_in && (i - burn_in) % stride == stride - 1) out.push_back(level);
  };
  if (form == ChainForm::storage)
    detail::run_storage(spec.threshold, spec.capacity, initial, n, draw, visit);
  else
    detail::run_moran(spec.threshold, spec.capacity, initial, n, draw, visit);
  return out;
}

/// Least-squares slope (per slot) of the block means of an infinite-buffer run.
inline double mean_drift(const TrajectoryStats& stats) {
  if (stats.finite_capacity) throw PreconditionError("mean_drift: only defined for an infinite buffer");
  const auto& ys = stats.mean_series;
  std::vector<double> xs(ys.size());
  for (std::size_t j = 0; j < ys.size(); ++j)
    xs[j] = static_cast<double>(stats.burn_in) + static_cast<double>(stats.block) * (static_cast<double>(j) + 0.5);
  return ols_slope(xs, ys);
}

}  // namespace ehlab
