// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ehlab/chain_sim.hpp"
#include "ehlab/commands.hpp"
#include "ehlab/figures.hpp"
#include "ehlab/limiting_dist.hpp"
#include "ehlab/performance.hpp"
#include "ehlab/scenario.hpp"
#include "ehlab/stats.hpp"

using namespace ehlab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> midpoints(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * (i + 0.5) / n);
  return g;
}

EffectiveSpec unit_spec(double delta, Capacity k) { return ideal_spec(HarvestModel::exponential(1.0), delta, k); }

Outcome fixed_point_identity() {
  double worst = 0;
  for (double delta : {0.2, 0.5, 0.8, 1.0, 1.2, 2.0, 3.0}) {
    const double rate = 1.0, m = delta;
    const double d = normalized_exponent(delta) / m;
    worst = std::max(worst, std::abs(rate * std::exp(d * m) - (rate + d)));
  }
  return {worst < 1e-10, fmt("max |lambda e^{dM} - (lambda + d)| = %.3g (bound 1e-10)", worst)};
}

Outcome integral_equation_residuals() {
  double worst_res = 0, worst_mass = 0;
  const auto harvest = HarvestModel::exponential(1.0);
  for (double delta : {0.5, 1.0, 2.0})
    for (double l : {3.0, 4.0, 7.0}) {
      const auto dist = finite_exact(1.0, delta, l * delta);
      worst_res = std::max(worst_res, integral_residual(dist, harvest, delta, midpoints(0.0, l * delta, 60)));
      worst_mass = std::max(worst_mass, std::abs(dist.mass() - 1.0));
    }
  return {worst_res < 1e-8 && worst_mass < 1e-9,
          fmt("max residual %.3g (bound 1e-8), max |mass - 1| %.3g (bound 1e-9)", worst_res, worst_mass)};
}

Outcome oracle_triangle(std::uint64_t seed) {
  const auto harvest = HarvestModel::exponential(1.0);
  double worst_linf = 0, worst_l1 = 0, worst_atom = 0;
  int idx = 0;
  for (auto [delta, l] : {std::pair{1.0, 4.0}, {0.5, 7.0}, {2.0, 3.0}}) {
    const double m = delta, k = l * delta;
    const auto exact = finite_exact(1.0, m, k);
    const auto oracle = solve_integral_equation(harvest, m, k, 2000);
    double peak = 0, diff = 0;
    for (const auto& s : oracle.segments()) {
      const double x = 0.5 * (s.lo + s.hi);
      peak = std::max(peak, exact.density(x));
      diff = std::max(diff, std::abs(exact.density(x) - s.density(x)));
    }
    worst_linf = std::max(worst_linf, diff / peak);

    RunControl rc;
    rc.seed = point_seed(seed, 3, idx++);
    const auto sim = simulate(unit_spec(m, Capacity::finite(k)), rc);
    const auto h = sim.histogram.rebinned(20);
    double l1 = 0;
    for (std::size_t i = 0; i < h.density.size(); ++i) {
      const double lo = h.bin_lo(i), hi = lo + h.width;
      l1 += std::abs(h.density[i] * h.width - exact.integral(lo, hi));
    }
    worst_l1 = std::max(worst_l1, l1);
    worst_atom = std::max(worst_atom, std::abs(exact.atom() - sim.atom_mass));
  }
  return {worst_linf < 5e-3 && worst_l1 < 0.02 && worst_atom < 0.005,
          fmt("L-inf(exact, oracle) %.3g of peak (bound 5e-3), L1(exact, histogram) %.3g (bound 0.02), "
              "|pi(K) - atom| %.3g (bound 0.005)",
              worst_linf, worst_l1, worst_atom)};
}

Outcome approximation_bound() {
  double worst3 = 0, worst4 = 0, worst_gap = 0;
  for (int i = 5; i <= 20; ++i) {
    const double m = i / 10.0;
    const auto grid = midpoints(0.0, m, 50);
    for (int l : {3, 4}) {
      const double k = l * m;
      const auto exact = finite_exact(1.0, m, k);
      const auto approx = finite_approx(1.0, m, k, 2);
      for (const auto& e : approx_error_profile(1.0, m, k, 2, grid)) {
        (l == 3 ? worst3 : worst4) = std::max(l == 3 ? worst3 : worst4, std::abs(e.relative));
        worst_gap = std::max(worst_gap, std::abs(e.error - (exact.density(e.x) - approx.dist.density(e.x))));
      }
    }
  }
  return {worst3 < 0.083 && worst4 < 0.014 && worst_gap < 1e-9,
          fmt("max |e/g| %.4f for K=3M (bound 0.083), %.4f for K=4M (bound 0.014); "
              "closed-form error vs subtraction %.3g (bound 1e-9)",
              worst3, worst4, worst_gap)};
}

std::map<std::string, double> argmin_by_curve(const std::vector<Figure2Row>& rows) {
  std::map<std::string, std::pair<double, double>> best;
  for (const auto& r : rows) {
    auto it = best.find(r.k_label);
    if (it == best.end() || r.aer_closed_form < it->second.second)
      best[r.k_label] = {r.delta_tilde, r.aer_closed_form};
  }
  std::map<std::string, double> out;
  for (const auto& [k, v] : best) out[k] = v.first;
  return out;
}

Outcome figure2_reproduction(const Scenario& sc) {
  const auto rows = figure2(sc);
  int bad = 0;
  double worst = 0;
  for (const auto& r : rows) {
    const double tol = std::max(0.02 * r.aer_closed_form, 3 * r.mc_stderr);
    const double ratio = std::abs(r.aer_closed_form - r.aer_mc) / tol;
    worst = std::max(worst, ratio);
    if (ratio > 1) ++bad;
  }
  const auto opt = argmin_by_curve(rows);
  const double d4 = opt.at("4"), d7 = opt.at("7"), d20 = opt.at("20"), dinf = opt.at("inf");
  const bool order = d4 < d7 && d7 < d20 && d20 <= 1.0 && std::abs(dinf - 1.0) < 1e-9;
  return {bad == 0 && order,
          fmt("%d of %zu points outside max(2%%, 3 sigma) (worst %.2f of tolerance); "
              "delta_opt 4: %.2f, 7: %.2f, 20: %.2f, inf: %.2f",
              bad, rows.size(), worst, d4, d7, d20, dinf)};
}

Outcome figure3_reproduction(const Scenario& sc) {
  const auto rows = figure3(sc);
  std::map<std::string, std::pair<int, double>> misses;  // per curve: count, worst z
  int bad = 0;
  for (const auto& r : rows) {
    const double z = (r.pout_mc - r.pout_closed_form) / r.mc_stderr;
    auto& m = misses[r.k_label];
    if (std::abs(z) > std::abs(m.second)) m.second = z;
    if (!(std::abs(z) <= 3)) {
      ++m.first;
      ++bad;
    }
  }
  const auto slopes = figure3_slopes(rows, 30, 40);
  bool slopes_ok = slopes.size() == sc.capacities.size();
  double lo = 1e9, hi = -1e9;
  for (const auto& [k, s] : slopes) {
    slopes_ok = slopes_ok && s >= 0.9 && s <= 1.1;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  slopes_ok = slopes_ok && hi - lo < 0.1;
  std::string per_curve;
  for (const auto& k : sc.capacities) {
    const auto label = capacity_label(k);
    per_curve += fmt("%s K=%s: %d beyond 3 sigma, worst z %+.2f, slope %.3f", per_curve.empty() ? "" : ";",
                     label.c_str(), misses[label].first, misses[label].second,
                     slopes.count(label) ? slopes.at(label) : NAN);
  }
  return {bad == 0 && slopes_ok,
          fmt("%d of %zu points beyond 3 sigma; slopes in [%.3f, %.3f], spread %.3f (bounds [0.9, 1.1], < 0.1);",
              bad, rows.size(), lo, hi, hi - lo) +
              per_curve};
}

Outcome accumulation_regime(std::uint64_t seed) {
  RunControl rc;
  rc.seed = point_seed(seed, 7, 0);
  const auto s = simulate(unit_spec(0.8, Capacity::infinite()), rc);
  const double drift = mean_drift(s);
  return {s.tail_below_m < 1e-4 && std::abs(drift - 0.2) <= 0.1 * 0.2,
          fmt("tail fraction with P_UL < M %.3g (bound 1e-4), drift %.4f per slot (expected 0.2 +- 10%%)",
              s.tail_below_m, drift)};
}

Outcome moran_equivalence(std::uint64_t seed) {
  bool pass = true;
  std::string detail;
  int idx = 0;
  for (double delta : {0.7, 1.3})
    for (double l : {4.0, 1e4}) {
      const auto spec = unit_spec(delta, Capacity::finite(l * delta));
      const std::uint64_t burn = l > 100 ? 100'000 : 10'000;
      const auto a = sample_path(spec, ChainForm::storage, 20'000, 25, burn, point_seed(seed, 8, idx));
      const auto b = sample_path(spec, ChainForm::moran, 20'000, 25, burn, point_seed(seed, 9, idx));
      ++idx;
      const double ks = ks_two_sample(a, b), crit = ks_critical(a.size(), b.size(), 0.01);
      pass = pass && ks < crit;
      detail += fmt("%s(delta %.1f, K %gM) KS %.4f vs %.4f", detail.empty() ? "" : "; ", delta, l, ks, crit);
    }
  return {pass, detail};
}

Outcome determinism(const Scenario& sc) {
  const auto dir = std::filesystem::temp_directory_path() / "ehlab_acceptance";
  std::filesystem::remove_all(dir);
  std::vector<std::string> bytes;
  for (const char* run : {"a", "b"}) {
    const auto path =
        write_output(dir / run, "figure2", sc, [&](std::ostream& os) { write_figure2_csv(os, figure2(sc)); });
    std::ifstream in(path, std::ios::binary);
    bytes.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  std::filesystem::remove_all(dir);
  return {!bytes[0].empty() && bytes[0] == bytes[1],
          fmt("two figure2 runs, %zu bytes each, %s", bytes[0].size(), bytes[0] == bytes[1] ? "identical" : "differ")};
}

}  // namespace

int main() {
  const Scenario sc = load_scenario(EHLAB_CONFIG_DIR "/table1.cfg");
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "fixed-point identity", 1, fixed_point_identity},
      {2, "integral-equation residuals", 10, integral_equation_residuals},
      {3, "oracle triangle", 120, [&] { return oracle_triangle(sc.seed); }},
      {4, "approximation bound", 30, approximation_bound},
      {5, "figure 2 reproduction", 300, [&] { return figure2_reproduction(sc); }},
      {6, "figure 3 reproduction", 300, [&] { return figure3_reproduction(sc); }},
      {7, "accumulation regime", 30, [&] { return accumulation_regime(sc.seed); }},
      {8, "Moran equivalence", 60, [&] { return moran_equivalence(sc.seed); }},
      {9, "determinism", 600, [&] { return determinism(sc); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = secs <= c.budget_s;
    const bool pass = o.pass && in_budget;
    if (!pass) ++failed;
    std::printf("criterion %d %s: %s: %s [%.1f s, budget %.0f s%s]\n", c.id, c.name, pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs, c.budget_s, in_budget ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
