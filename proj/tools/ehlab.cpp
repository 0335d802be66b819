// ehlab: scenario-driven figure data, sweeps and limiting densities as CSV.

#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ehlab/commands.hpp"

namespace {

struct Common {
  std::string config;
  std::string out = ".";
  ehlab::Overrides o;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "scenario INI file (defaults to the built-in table1 scenario)");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--seed", c.o.seed, "base random seed");
  cmd->add_option("--slots", c.o.slots, "simulated slots per point, burn-in included");
  cmd->add_option("--burn-in", c.o.burn_in, "discarded leading slots");
  cmd->add_option("--k", c.o.k, "capacity in units of the mean effective harvest, or inf");
  cmd->add_option("--delta", c.o.delta, "normalized effective threshold");
  cmd->add_option("--snr-db", c.o.snr_db, "normalized average SNR in dB");
}

ehlab::Scenario scenario(const Common& c, ehlab::GridTarget grid) {
  ehlab::Scenario sc = c.config.empty() ? ehlab::Scenario{} : ehlab::load_scenario(c.config);
  return ehlab::apply_overrides(std::move(sc), c.o, grid);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-harvesting node buffer and link performance"};
  app.require_subcommand(1);

  Common c;
  std::string mode = "exact";
  std::string metric = "aer";

  auto* pdf = app.add_subcommand("pdf", "limiting buffer density (normalized units, mean harvest 1)");
  add_common(pdf, c);
  pdf->add_option("--mode", mode, "exact, approx, oracle or simulated")
      ->check(CLI::IsMember({"exact", "approx", "oracle", "simulated"}));

  auto* fig2 = app.add_subcommand("figure2", "AER against delta~ for each capacity");
  add_common(fig2, c);
  fig2->add_option("--grid", c.o.grid, "delta~ grid lo:step:hi");

  auto* fig3 = app.add_subcommand("figure3", "outage at the optimal delta~ against SNR");
  add_common(fig3, c);
  fig3->add_option("--grid", c.o.grid, "SNR grid in dB lo:step:hi");

  auto* sim = app.add_subcommand("simulate", "trajectory summary of the physical buffer");
  add_common(sim, c);

  auto* aer = app.add_subcommand("aer", "average error rate at one point");
  add_common(aer, c);

  auto* outage = app.add_subcommand("outage", "outage probability at one point");
  add_common(outage, c);

  auto* sweep = app.add_subcommand("sweep", "metric against delta~ for each capacity");
  add_common(sweep, c);
  sweep->add_option("--grid", c.o.grid, "delta~ grid lo:step:hi");
  sweep->add_option("--metric", metric, "aer or outage")->check(CLI::IsMember({"aer", "outage"}));

  CLI11_PARSE(app, argc, argv);

  try {
    using ehlab::GridTarget;
    const std::filesystem::path out = c.out;
    std::filesystem::path written;
    if (pdf->parsed()) {
      const auto sc = scenario(c, GridTarget::none);
      written = ehlab::write_output(out, "pdf", sc, [&](std::ostream& os) {
        ehlab::run_pdf(os, sc, ehlab::parse_pdf_mode(mode));
      });
    } else if (fig2->parsed()) {
      const auto sc = scenario(c, GridTarget::delta);
      const auto rows = ehlab::figure2(sc);
      written = ehlab::write_output(out, "figure2", sc, [&](std::ostream& os) { ehlab::write_figure2_csv(os, rows); });
    } else if (fig3->parsed()) {
      const auto sc = scenario(c, GridTarget::snr);
      const auto rows = ehlab::figure3(sc);
      written = ehlab::write_output(out, "figure3", sc, [&](std::ostream& os) { ehlab::write_figure3_csv(os, rows); });
    } else if (sim->parsed()) {
      const auto sc = scenario(c, GridTarget::none);
      written = ehlab::write_output(out, "simulate", sc, [&](std::ostream& os) { ehlab::run_simulate(os, sc); });
    } else if (aer->parsed() || outage->parsed()) {
      const auto sc = scenario(c, GridTarget::none);
      const auto m = aer->parsed() ? ehlab::Metric::aer : ehlab::Metric::outage;
      written = ehlab::write_output(out, ehlab::metric_name(m), sc,
                                    [&](std::ostream& os) { ehlab::run_metric(os, sc, m); });
    } else if (sweep->parsed()) {
      const auto sc = scenario(c, GridTarget::delta);
      const auto m = ehlab::parse_metric(metric);
      written = ehlab::write_output(out, "sweep", sc, [&](std::ostream& os) { ehlab::run_sweep(os, sc, m); });
    }
    std::cout << written.string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "ehlab: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
