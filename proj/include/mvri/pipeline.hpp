#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "mvri/config.hpp"

namespace mvri {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitModel = 2,
  kExitSolver = 3,
  kExitFrontier = 4,
  kExitValidation = 5,
};

/// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  std::optional<int> grid_steps;
  std::optional<int> n_max;
};

void apply_overrides(RunConfig& config, const Overrides& overrides);

/// Each command writes its artifacts under config.output_dir, reports to
/// `out`/`err`, and returns an ExitCode.
int cmd_solve(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_frontier(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_validate(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace mvri
