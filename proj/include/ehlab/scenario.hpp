#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ehlab/chain_sim.hpp"
#include "ehlab/core_model.hpp"
#include "ehlab/csv.hpp"
#include "ehlab/errors.hpp"

namespace ehlab {

/// Parses "lo:step:hi" (inclusive) or a comma-separated list.
inline std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw PreconditionError("grid: not a number: '" + s + "'");
    }
    if (used != s.size()) throw PreconditionError("grid: trailing characters in '" + s + "'");
    return v;
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw PreconditionError("grid must look like lo:step:hi");
    const double lo = number(parts[0]), step = number(parts[1]), hi = number(parts[2]);
    if (!(step > 0) || hi < lo) throw PreconditionError("grid needs step > 0 and hi >= lo");
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long i = 0; i <= n; ++i) {
      // snap away accumulated binary noise so 0.1:0.1:0.3 yields 0.3, not 0.30000000000000004
      const double v = lo + static_cast<double>(i) * step;
      out.push_back(std::round(v * 1e12) / 1e12);
    }
    return out;
  }
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');) {
    p.erase(0, p.find_first_not_of(' '));
    p.erase(p.find_last_not_of(' ') + 1);
    out.push_back(number(p));
  }
  if (out.empty()) throw PreconditionError("grid is empty");
  return out;
}

/// Parses a capacity in units of the mean harvest: a number or "inf".
inline Capacity parse_capacity(const std::string& s) {
  if (s == "inf" || s == "infinite") return Capacity::infinite();
  const auto g = parse_grid(s);
  if (g.size() != 1) throw PreconditionError("capacity must be a single value");
  return Capacity::finite(g.front());
}

inline std::string capacity_label(Capacity k) { return k.is_finite() ? format_double(k.value()) : "inf"; }

/**
 * A named bundle of plant, link, sweep and run parameters. Energies are
 * stored as configured (uJ per slot, uW); capacities and thresholds are in
 * units of the mean effective harvest X~ = beta X.
 */
struct Scenario {
  std::string name = "table1";

  double x_mean_tilde_uj = 10.0;
  double alpha = 1.5;
  double beta = 0.9;
  double p_circuit_uw = 0.2;
  double p_leak_uw = 0.0;

  std::vector<Capacity> capacities{Capacity::finite(4), Capacity::finite(7), Capacity::finite(20),
                                   Capacity::infinite()};

  std::optional<double> gamma_bar_db = 24.6;  // empty: derive from the link budget
  double mod_a = 1.0;
  double mod_b = 2.0;
  double gamma_thr_db = 5.0;
  double bw_mhz = 5.0;
  double noise_figure_db = 5.0;
  double temperature_k = 300.0;
  double ul_freq_ghz = 2.45;
  double distance_m = 5.0;
  double gain_ap_dbi = 12.0;
  double gain_node_dbi = 2.0;
  double path_loss_exponent = 2.7;

  std::string delta_grid = "0.1:0.1:1.7";
  std::string opt_delta_grid = "0.05:0.05:1.7";
  std::string snr_grid_db = "10:1:40";

  double delta = 1.0;  // single-point commands
  Capacity k_point = Capacity::finite(4);

  std::uint64_t n_slots = 1'000'000;
  std::uint64_t burn_in = 10'000;
  std::uint64_t seed = 1;
  std::size_t bins = 1000;
  int n_c = 2;
  std::size_t n_grid = 2000;

  double x_mean_tilde() const { return x_mean_tilde_uj * kMicro; }
  double p_constant() const { return (p_circuit_uw + p_leak_uw) * kMicro; }

  double noise_power() const {
    return link_budget::noise_power(bw_mhz * 1e6, noise_figure_db, temperature_k);
  }

  double link_budget_gain() const {
    return link_budget::channel_gain(ul_freq_ghz * 1e9, distance_m, gain_ap_dbi, gain_node_dbi, path_loss_exponent);
  }

  /// gamma~ = Omega_UL X~ / sigma_n^2 in linear units.
  double gamma_bar() const {
    if (gamma_bar_db) return db_to_linear(*gamma_bar_db);
    return link_budget_gain() * x_mean_tilde() / noise_power();
  }

  /// Physical link at normalized SNR gamma (defaults to gamma_bar()).
  LinkModel link(std::optional<double> gamma = std::nullopt) const {
    const double sigma2 = noise_power();
    LinkModel l;
    l.noise_power = sigma2;
    l.omega_ul = gamma.value_or(gamma_bar()) * sigma2 / x_mean_tilde();
    l.mod_a = mod_a;
    l.mod_b = mod_b;
    l.gamma_thr = db_to_linear(gamma_thr_db);
    return l;
  }

  /// Physical harvest law: exponential with mean X~ / beta.
  HarvestModel harvest() const { return HarvestModel::exponential_with_mean(x_mean_tilde() / beta); }

  /// Physical system whose effective threshold is delta~ X~ and capacity k X~.
  SystemSpec system(double delta_tilde, Capacity k_norm) const {
    SystemSpec s;
    s.alpha = alpha;
    s.beta = beta;
    s.p_circuit = p_circuit_uw * kMicro;
    s.p_leak = p_leak_uw * kMicro;
    s.capacity = k_norm.scaled(x_mean_tilde());
    s.m_desired = 1.0;
    s.m_desired = desired_power(delta_tilde * x_mean_tilde(), s);
    s.validate();
    return s;
  }

  RunControl run(std::uint64_t run_seed) const {
    RunControl rc;
    rc.n_slots = n_slots;
    rc.burn_in = burn_in;
    rc.seed = run_seed;
    rc.bins = bins;
    return rc;
  }

  void validate() const {
    if (name.empty() || name.find_first_of("/\\ ") != std::string::npos)
      throw PreconditionError("scenario name must be non-empty without slashes or spaces");
    if (!(x_mean_tilde_uj > 0)) throw PreconditionError("x_mean_tilde_uj must be > 0");
    if (capacities.empty()) throw PreconditionError("at least one capacity is required");
    if (!(bw_mhz > 0) || !(noise_figure_db > 0)) throw PreconditionError("bw_mhz and noise_figure_db must be > 0");
    if (n_c < 1) throw PreconditionError("n_c must be >= 1");
    parse_grid(delta_grid);
    parse_grid(opt_delta_grid);
    parse_grid(snr_grid_db);
    system(delta, k_point);
    link().validate();
    run(seed).validate(Capacity::infinite());
  }
};

namespace detail {

inline std::string join_capacities(const std::vector<Capacity>& ks) {
  std::string s;
  for (std::size_t i = 0; i < ks.size(); ++i) s += (i ? "," : "") + capacity_label(ks[i]);
  return s;
}

inline std::vector<Capacity> split_capacities(const std::string& text) {
  std::vector<Capacity> out;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');) {
    p.erase(0, p.find_first_not_of(' '));
    p.erase(p.find_last_not_of(' ') + 1);
    out.push_back(parse_capacity(p));
  }
  return out;
}

}  // namespace detail

/// Reads an INI scenario; missing keys keep the built-in table1 defaults, unknown keys are errors.
inline Scenario parse_scenario(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw PreconditionError(std::string("config: ") + e.what());
  }
  Scenario s;
  auto num = [](const std::string& v, const std::string& key) {
    const auto g = parse_grid(v);
    if (g.size() != 1) throw PreconditionError("config: " + key + " must be a single number");
    return g.front();
  };
  auto count = [&](const std::string& v, const std::string& key) {
    const double d = num(v, key);
    if (d < 0 || d != std::floor(d)) throw PreconditionError("config: " + key + " must be a non-negative integer");
    return static_cast<std::uint64_t>(d);
  };
  for (const auto& [section, body] : tree) {
    for (const auto& [key, node] : body) {
      const std::string v = node.get_value<std::string>();
      const std::string full = section + "." + key;
      if (full == "scenario.name") s.name = v;
      else if (full == "harvest.x_mean_tilde_uj") s.x_mean_tilde_uj = num(v, full);
      else if (full == "plant.alpha") s.alpha = num(v, full);
      else if (full == "plant.beta") s.beta = num(v, full);
      else if (full == "plant.p_circuit_uw") s.p_circuit_uw = num(v, full);
      else if (full == "plant.p_leak_uw") s.p_leak_uw = num(v, full);
      else if (full == "buffer.k_capacity_x_mean") s.capacities = detail::split_capacities(v);
      else if (full == "link.gamma_bar_db") s.gamma_bar_db = v.empty() ? std::nullopt : std::optional(num(v, full));
      else if (full == "link.mod_a") s.mod_a = num(v, full);
      else if (full == "link.mod_b") s.mod_b = num(v, full);
      else if (full == "link.gamma_thr_db") s.gamma_thr_db = num(v, full);
      else if (full == "link.bw_mhz") s.bw_mhz = num(v, full);
      else if (full == "link.noise_figure_db") s.noise_figure_db = num(v, full);
      else if (full == "link.temperature_k") s.temperature_k = num(v, full);
      else if (full == "link.ul_freq_ghz") s.ul_freq_ghz = num(v, full);
      else if (full == "link.distance_m") s.distance_m = num(v, full);
      else if (full == "link.gain_ap_dbi") s.gain_ap_dbi = num(v, full);
      else if (full == "link.gain_node_dbi") s.gain_node_dbi = num(v, full);
      else if (full == "link.path_loss_exponent") s.path_loss_exponent = num(v, full);
      else if (full == "sweep.delta_grid") s.delta_grid = v;
      else if (full == "sweep.opt_delta_grid") s.opt_delta_grid = v;
      else if (full == "sweep.snr_grid_db") s.snr_grid_db = v;
      else if (full == "point.delta") s.delta = num(v, full);
      else if (full == "point.k_capacity_x_mean") s.k_point = parse_capacity(v);
      else if (full == "run.n_slots") s.n_slots = count(v, full);
      else if (full == "run.burn_in") s.burn_in = count(v, full);
      else if (full == "run.seed") s.seed = count(v, full);
      else if (full == "run.bins") s.bins = count(v, full);
      else if (full == "run.n_c") s.n_c = static_cast<int>(count(v, full));
      else if (full == "run.n_grid") s.n_grid = count(v, full);
      else throw PreconditionError("config: unknown key '" + full + "'");
    }
  }
  s.validate();
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open config '" + path + "'");
  return parse_scenario(in);
}

/// Writes every key in a fixed order; parse_scenario(serialize) reproduces the scenario.
inline void serialize_scenario(std::ostream& os, const Scenario& s) {
  auto f = format_double;
  os << "[scenario]\nname = " << s.name << "\n\n";
  os << "[harvest]\nx_mean_tilde_uj = " << f(s.x_mean_tilde_uj) << "\n\n";
  os << "[plant]\nalpha = " << f(s.alpha) << "\nbeta = " << f(s.beta) << "\np_circuit_uw = " << f(s.p_circuit_uw)
     << "\np_leak_uw = " << f(s.p_leak_uw) << "\n\n";
  os << "[buffer]\nk_capacity_x_mean = " << detail::join_capacities(s.capacities) << "\n\n";
  os << "[link]\ngamma_bar_db = " << (s.gamma_bar_db ? f(*s.gamma_bar_db) : "") << "\nmod_a = " << f(s.mod_a)
     << "\nmod_b = " << f(s.mod_b) << "\ngamma_thr_db = " << f(s.gamma_thr_db) << "\nbw_mhz = " << f(s.bw_mhz)
     << "\nnoise_figure_db = " << f(s.noise_figure_db) << "\ntemperature_k = " << f(s.temperature_k)
     << "\nul_freq_ghz = " << f(s.ul_freq_ghz) << "\ndistance_m = " << f(s.distance_m)
     << "\ngain_ap_dbi = " << f(s.gain_ap_dbi) << "\ngain_node_dbi = " << f(s.gain_node_dbi)
     << "\npath_loss_exponent = " << f(s.path_loss_exponent) << "\n\n";
  os << "[sweep]\ndelta_grid = " << s.delta_grid << "\nopt_delta_grid = " << s.opt_delta_grid
     << "\nsnr_grid_db = " << s.snr_grid_db << "\n\n";
  os << "[point]\ndelta = " << f(s.delta) << "\nk_capacity_x_mean = " << capacity_label(s.k_point) << "\n\n";
  os << "[run]\nn_slots = " << s.n_slots << "\nburn_in = " << s.burn_in << "\nseed = " << s.seed
     << "\nbins = " << s.bins << "\nn_c = " << s.n_c << "\nn_grid = " << s.n_grid << "\n";
}

inline std::string serialize_scenario(const Scenario& s) {
  std::ostringstream os;
  serialize_scenario(os, s);
  return os.str();
}

}  // namespace ehlab
