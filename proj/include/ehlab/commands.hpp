#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ehlab/chain_sim.hpp"
#include "ehlab/csv.hpp"
#include "ehlab/errors.hpp"
#include "ehlab/figures.hpp"
#include "ehlab/limiting_dist.hpp"
#include "ehlab/performance.hpp"
#include "ehlab/scenario.hpp"

namespace ehlab {

enum class PdfMode { exact, approx, oracle, simulated };

inline PdfMode parse_pdf_mode(const std::string& s) {
  if (s == "exact") return PdfMode::exact;
  if (s == "approx") return PdfMode::approx;
  if (s == "oracle") return PdfMode::oracle;
  if (s == "simulated") return PdfMode::simulated;
  throw PreconditionError("unknown pdf mode '" + s + "' (exact, approx, oracle, simulated)");
}

inline Metric parse_metric(const std::string& s) {
  if (s == "aer") return Metric::aer;
  if (s == "outage") return Metric::outage;
  throw PreconditionError("unknown metric '" + s + "' (aer, outage)");
}

/// Command-line overrides; unset fields keep the scenario values.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> slots;
  std::optional<std::uint64_t> burn_in;
  std::optional<std::string> k;  // "inf" or a multiple of X~
  std::optional<double> delta;
  std::optional<double> snr_db;
  std::optional<std::string> grid;
};

enum class GridTarget { none, delta, snr };

/// The scenario with overrides applied. An explicit --k replaces both the
/// single-point capacity and the list of swept capacities.
inline Scenario apply_overrides(Scenario sc, const Overrides& o, GridTarget grid_target) {
  if (o.seed) sc.seed = *o.seed;
  if (o.slots) sc.n_slots = *o.slots;
  if (o.burn_in) sc.burn_in = *o.burn_in;
  if (o.k) {
    sc.k_point = parse_capacity(*o.k);
    sc.capacities = {sc.k_point};
  }
  if (o.delta) sc.delta = *o.delta;
  if (o.snr_db) sc.gamma_bar_db = *o.snr_db;
  if (o.grid) {
    if (grid_target == GridTarget::delta) sc.delta_grid = *o.grid;
    else if (grid_target == GridTarget::snr) sc.snr_grid_db = *o.grid;
    else throw PreconditionError("--grid does not apply to this command");
  }
  sc.validate();
  return sc;
}

/**
 * Limiting density of the effective chain in units of the mean effective
 * harvest: rate 1, threshold delta, capacity k. Simulated mode writes
 * histogram bin midpoints and the clip-counted atom.
 */
inline void run_pdf(std::ostream& os, const Scenario& sc, PdfMode mode) {
  const double m = sc.delta;
  const Capacity k = sc.k_point;
  switch (mode) {
    case PdfMode::exact:
      write_distribution_csv(os, k.is_finite() ? finite_exact(1.0, m, k.value()) : infinite_exact(1.0, m));
      return;
    case PdfMode::approx:
      if (!k.is_finite()) {
        write_distribution_csv(os, infinite_exact(1.0, m));
        return;
      }
      write_distribution_csv(os, finite_approx(1.0, m, k.value(), sc.n_c).dist);
      return;
    case PdfMode::oracle:
      if (!k.is_finite()) throw PreconditionError("oracle mode needs a finite capacity");
      write_distribution_csv(os, solve_integral_equation(HarvestModel::exponential(1.0), m, k.value(), sc.n_grid));
      return;
    case PdfMode::simulated: {
      const auto stats = simulate(ideal_spec(HarvestModel::exponential(1.0), m, k), sc.run(sc.seed));
      const auto& h = stats.histogram;
      os << "x,density\n";
      for (std::size_t i = 0; i < h.density.size(); ++i)
        os << format_double(h.bin_mid(i)) << ',' << format_double(h.density[i]) << '\n';
      os << "atom_at_K," << format_double(stats.atom_mass) << '\n';
      return;
    }
  }
}

/// Physical-system trajectory summary at the scenario point, as metric,value rows.
inline void run_simulate(std::ostream& os, const Scenario& sc) {
  const SystemSpec spec = sc.system(sc.delta, sc.k_point);
  const auto stats = simulate_imperfect(spec, sc.harvest(), sc.run(sc.seed));
  auto row = [&](const char* name, const std::string& v) { os << name << ',' << v << '\n'; };
  os << "metric,value\n";
  row("delta_tilde", format_double(sc.delta));
  row("k_capacity_x_mean", capacity_label(sc.k_point));
  row("m_desired_uw", format_double(spec.m_desired / kMicro));
  row("m_effective_uw", format_double(effective_spec(spec, sc.harvest()).threshold / kMicro));
  row("n_slots", std::to_string(stats.n_slots));
  row("burn_in", std::to_string(stats.burn_in));
  row("seed", std::to_string(stats.seed));
  row("mean_level_uj", format_double(stats.mean_level / kMicro));
  row("atom_mass", format_double(stats.atom_mass));
  row("p_full_power", format_double(stats.p_m_hat));
  row("tail_below_m", format_double(stats.tail_below_m));
}

inline constexpr const char* kPointHeader = "K_label,delta_tilde,gamma_bar_dB,metric,closed_form,mc,mc_stderr\n";

struct PointRow {
  std::string k_label;
  double delta_tilde = 0;
  double gamma_bar_db = 0;
  Metric metric = Metric::aer;
  double closed_form = 0;
  Estimate mc;
};

inline void write_point_rows(std::ostream& os, const std::vector<PointRow>& rows) {
  os << kPointHeader;
  for (const auto& r : rows)
    os << r.k_label << ',' << format_double(r.delta_tilde) << ',' << format_double(r.gamma_bar_db) << ','
       << metric_name(r.metric) << ',' << format_double(r.closed_form) << ',' << format_double(r.mc.mean) << ','
       << format_double(r.mc.std_error) << '\n';
}

/// Closed form and Monte Carlo of one metric at the scenario point.
inline PointRow evaluate_point(Metric metric, const Scenario& sc, double delta, Capacity k, std::uint64_t seed) {
  const double gamma = sc.gamma_bar();
  PointRow r{capacity_label(k), delta, linear_to_db(gamma), metric,
             closed_form(metric, sc.link(), gamma, delta, k, sc.n_c), {}};
  r.mc = scenario_mc(metric, sc, delta, k, gamma, seed);
  return r;
}

inline void run_metric(std::ostream& os, const Scenario& sc, Metric metric) {
  write_point_rows(os, {evaluate_point(metric, sc, sc.delta, sc.k_point, sc.seed)});
}

/// Metric against delta~ for every configured capacity.
inline void run_sweep(std::ostream& os, const Scenario& sc, Metric metric) {
  const auto grid = parse_grid(sc.delta_grid);
  const std::size_t per = grid.size();
  const auto rows = parallel_map<PointRow>(sc.capacities.size() * per, [&](std::size_t i) {
    return evaluate_point(metric, sc, grid[i % per], sc.capacities[i / per], point_seed(sc.seed, i / per, i % per));
  });
  write_point_rows(os, rows);
}

/// Writes `body` to <out_dir>/<command>_<scenario>.csv and returns the path.
/// The file is only created once the body has been produced in full.
template <class Body>
std::filesystem::path write_output(const std::filesystem::path& out_dir, const std::string& command,
                                   const Scenario& sc, Body&& body) {
  std::ostringstream text;
  body(text);
  std::filesystem::create_directories(out_dir);
  const auto path = out_dir / (command + "_" + sc.name + ".csv");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw PreconditionError("cannot write '" + path.string() + "'");
  os << text.str();
  os.flush();
  if (!os) throw NumericError("write failed for '" + path.string() + "'");
  return path;
}

}  // namespace ehlab
