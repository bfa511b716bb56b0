// mcsv: solve, sweep and verify the regularised vortex system.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mcsv/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Regularised vortex solver on the flat torus"};
  app.require_subcommand(1);

  std::string solve_config, sweep_config, solve_out, sweep_out;
  std::vector<std::string> snapshots;

  auto* solve = app.add_subcommand("solve", "solve at one q and write fields, summary and checks");
  solve->add_option("--config", solve_config, "INI configuration file")->required();
  solve->add_option("--out", solve_out, "output directory (overrides output.dir)");

  auto* sweep = app.add_subcommand("sweep", "solve along q_list and write the convergence table");
  sweep->add_option("--config", sweep_config, "INI configuration file")->required();
  sweep->add_option("--out", sweep_out, "output directory (overrides output.dir)");

  auto* verify = app.add_subcommand("verify", "re-run every check on stored snapshots");
  verify->add_option("snapshots", snapshots, "u, v, w (and optionally u0) snapshot files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : mcsv::kExitConfig;
  }

  auto opt = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<std::string>(s); };
  if (solve->parsed()) return mcsv::cmd_solve(solve_config, opt(solve_out), std::cout, std::cerr);
  if (sweep->parsed()) return mcsv::cmd_sweep(sweep_config, opt(sweep_out), std::cout, std::cerr);
  return mcsv::cmd_verify(snapshots, std::cout, std::cerr);
}
