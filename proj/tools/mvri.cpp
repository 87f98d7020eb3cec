// Batch front end: solve / frontier / simulate / validate.
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mvri/errors.hpp"
#include "mvri/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Mean-variance investment-reinsurance solver"};
  app.require_subcommand(1);

  std::string config_path;
  mvri::Overrides overrides;
  bool dump = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Run configuration (JSON)")->required();
    cmd->add_option("--out", overrides.out, "Output directory");
    cmd->add_option("--seed", overrides.seed, "Simulation seed");
    cmd->add_option("--paths", overrides.paths, "Number of Monte Carlo paths");
    cmd->add_option("--grid-steps", overrides.grid_steps, "Riccati time steps");
    cmd->add_option("--nmax", overrides.n_max, "Claim-count truncation level");
    cmd->add_flag("--dump-config", dump, "Print the effective configuration and exit");
  };

  auto* solve = app.add_subcommand("solve", "Solve the Riccati pair, write sre.csv");
  auto* frontier = app.add_subcommand("frontier", "Efficient frontier, write frontier.csv");
  auto* simulate = app.add_subcommand("simulate", "Simulate wealth paths, write simulation.csv");
  auto* validate = app.add_subcommand("validate", "Monte Carlo check of the frontier");
  for (auto* cmd : {solve, frontier, simulate, validate}) add_common(cmd);

  CLI11_PARSE(app, argc, argv);

  mvri::RunConfig config;
  try {
    config = mvri::load_config(config_path);
    mvri::apply_overrides(config, overrides);
    if (dump) {
      std::cout << mvri::dump_config(config);
      return mvri::kExitOk;
    }
    if (solve->parsed()) return mvri::cmd_solve(config, std::cout, std::cerr);
    if (frontier->parsed()) return mvri::cmd_frontier(config, std::cout, std::cerr);
    if (simulate->parsed()) return mvri::cmd_simulate(config, std::cout, std::cerr);
    return mvri::cmd_validate(config, std::cout, std::cerr);
  } catch (const mvri::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return mvri::kExitModel;
  } catch (const mvri::ModelError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return mvri::kExitModel;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return mvri::kExitUsage;
  }
}
