#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "ehlab/csv.hpp"
#include "ehlab/performance.hpp"
#include "ehlab/scenario.hpp"
#include "ehlab/stats.hpp"

namespace ehlab {

/// Worker count: hardware concurrency, capped by EHLAB_THREADS when set.
inline unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("EHLAB_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1) throw PreconditionError("EHLAB_THREADS must be a positive integer");
    n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

/// out[i] = fn(i) for i < n, evaluated concurrently; the first exception is rethrown.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, Fn&& fn) {
  std::vector<T> out(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), std::max<std::size_t>(n, 1)));
  std::vector<std::jthread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// Seed for point `index` of curve `curve`; distinct streams per point.
inline std::uint64_t point_seed(std::uint64_t base, std::uint64_t curve, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (1 + curve * 1'000'003ULL + index);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Semi-analytic Monte Carlo of `metric` on the physical system at (delta~, K).
inline Estimate scenario_mc(Metric metric, const Scenario& sc, double delta_tilde, Capacity k_norm, double gamma,
                            std::uint64_t seed) {
  const auto eff = effective_spec(sc.system(delta_tilde, k_norm), sc.harvest());
  return mc_metric(metric, eff, sc.link(gamma), sc.run(seed));
}

struct Figure2Row {
  std::string k_label;
  double delta_tilde = 0;
  double aer_closed_form = 0;
  double aer_mc = 0;
  double mc_stderr = 0;
};

/// AER against delta~ for every configured capacity at the scenario SNR.
inline std::vector<Figure2Row> figure2(const Scenario& sc) {
  const auto grid = parse_grid(sc.delta_grid);
  const double gamma = sc.gamma_bar();
  const LinkModel link = sc.link();
  const std::size_t per = grid.size();
  return parallel_map<Figure2Row>(sc.capacities.size() * per, [&](std::size_t i) {
    const std::size_t ki = i / per, di = i % per;
    const Capacity k = sc.capacities[ki];
    const double d = grid[di];
    Figure2Row r{capacity_label(k), d, closed_form(Metric::aer, link, gamma, d, k, sc.n_c)};
    const auto e = scenario_mc(Metric::aer, sc, d, k, gamma, point_seed(sc.seed, ki, di));
    r.aer_mc = e.mean;
    r.mc_stderr = e.std_error;
    return r;
  });
}

struct Figure3Row {
  std::string k_label;
  double gamma_bar_db = 0;
  double delta_opt = 0;
  double pout_closed_form = 0;
  double pout_mc = 0;
  double mc_stderr = 0;
};

/// Outage against SNR, each point at its grid-optimal delta~.
inline std::vector<Figure3Row> figure3(const Scenario& sc) {
  const auto snr = parse_grid(sc.snr_grid_db);
  const auto opt_grid = parse_grid(sc.opt_delta_grid);
  const std::size_t per = snr.size();
  return parallel_map<Figure3Row>(sc.capacities.size() * per, [&](std::size_t i) {
    const std::size_t ki = i / per, si = i % per;
    const Capacity k = sc.capacities[ki];
    const double gamma = db_to_linear(snr[si]);
    const LinkModel link = sc.link(gamma);
    const auto best = optimize_delta(Metric::outage, link, gamma, k, opt_grid, sc.n_c);
    Figure3Row r{capacity_label(k), snr[si], best.delta, best.value};
    const auto e = scenario_mc(Metric::outage, sc, best.delta, k, gamma, point_seed(sc.seed, 100 + ki, si));
    r.pout_mc = e.mean;
    r.mc_stderr = e.std_error;
    return r;
  });
}

/// Least-squares slope of -log10(outage) against log10(SNR) over [lo_db, hi_db], per capacity.
inline std::map<std::string, double> figure3_slopes(const std::vector<Figure3Row>& rows, double lo_db = 30,
                                                    double hi_db = 40) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> pts;
  for (const auto& r : rows)
    if (r.gamma_bar_db >= lo_db - 1e-9 && r.gamma_bar_db <= hi_db + 1e-9) {
      pts[r.k_label].first.push_back(r.gamma_bar_db / 10.0);
      pts[r.k_label].second.push_back(-std::log10(r.pout_closed_form));
    }
  std::map<std::string, double> out;
  for (const auto& [label, xy] : pts)
    if (xy.first.size() >= 2) out[label] = ols_slope(xy.first, xy.second);
  return out;
}

inline void write_figure2_csv(std::ostream& os, const std::vector<Figure2Row>& rows) {
  os << "K_label,delta_tilde,aer_closed_form,aer_mc,mc_stderr\n";
  for (const auto& r : rows)
    os << r.k_label << ',' << format_double(r.delta_tilde) << ',' << format_double(r.aer_closed_form) << ','
       << format_double(r.aer_mc) << ',' << format_double(r.mc_stderr) << '\n';
}

inline void write_figure3_csv(std::ostream& os, const std::vector<Figure3Row>& rows) {
  os << "K_label,gamma_bar_dB,delta_opt,pout_closed_form,pout_mc,mc_stderr\n";
  for (const auto& r : rows)
    os << r.k_label << ',' << format_double(r.gamma_bar_db) << ',' << format_double(r.delta_opt) << ','
       << format_double(r.pout_closed_form) << ',' << format_double(r.pout_mc) << ',' << format_double(r.mc_stderr)
       << '\n';
}

}  // namespace ehlab
