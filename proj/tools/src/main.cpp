#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Vortex-filament experiments for Ginzburg-Landau heat flow on a Riemannian box"};
  app.require_subcommand(1);
  vltool::CommandOptions opts;
  static const char* commands[][2] = {
      {"geodesic", "relax the closed geodesic and compute its Jacobi spectrum"},
      {"evolve", "run the heat flow from an initial datum, with checkpoints"},
      {"minmax", "minmax endpoints and a good trajectory"},
      {"criticalpoint", "near-critical snapshot with varifold diagnostics"},
      {"flatnorm", "flat norm between two currents"},
      {"diagnose", "varifold diagnostics of a field checkpoint"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config, "experiment config (INI)")->required();
    sub->add_option("--out", opts.out, "output directory (overrides [output] dir)");
    sub->add_option("--threads", opts.threads, "worker threads")->check(CLI::PositiveNumber);
    if (std::string(name) == "evolve") sub->add_option("--resume", opts.resume, "checkpoint to resume from");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  return vltool::run_command(app.get_subcommands().front()->get_name(), opts, std::cerr);
}
