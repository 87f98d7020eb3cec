#include "mvri/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>

#include "json.hpp"
#include "mvri/errors.hpp"
#include "mvri/numerics.hpp"
#include "mvri/policy.hpp"

namespace mvri {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Relative change in P_i(0) between the run grid and a half-resolution grid
// above which the solve is flagged as under-resolved.
constexpr double kGridWarnTolerance = 1e-6;

std::ofstream open_output(const RunConfig& config, const std::string& name) {
  const fs::path dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::ofstream os(dir / name, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + (dir / name).string());
  return os;
}

struct Solved {
  std::shared_ptr<const SRESolution> sre;
  int code = kExitOk;
};

// validate_model + solve_sre with the exit-code mapping shared by all commands.
Solved solve_checked(const RunConfig& config, std::ostream& out, std::ostream& err,
                     bool verbose) {
  Solved res;
  try {
    const MarketModel model = build_model(config.model);
    const ModelDiagnostics diag = validate_model(model);
    if (!diag.ok) {
      for (const auto& v : diag.violations) err << "model error: " << v << '\n';
      res.code = kExitModel;
      return res;
    }
    res.sre = std::make_shared<const SRESolution>(solve_sre(model, config.grid));
    if (verbose) {
      const auto& cert = res.sre->certificate();
      out << "bounds certificate: c1=" << format_double(cert.c1)
          << " lower=" << format_double(cert.lower) << " upper=" << format_double(cert.upper)
          << '\n';
      out << "P1(0)=" << format_double(res.sre->p1_initial())
          << " P2(0)=" << format_double(res.sre->p2_initial()) << '\n';
      out << "levels: n_max=" << res.sre->n_max() << " nodes=" << res.sre->nodes() << '\n';
    }
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << '\n';
    res.code = kExitModel;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << '\n';
    res.code = kExitSolver;
  }
  return res;
}

void grid_convergence_check(const RunConfig& config, const SRESolution& sre, std::ostream& err) {
  SREGrid coarse = config.grid;
  coarse.steps = std::max(2, config.grid.steps / 2);
  if (coarse.steps == config.grid.steps) {
    err << "warning: grid-convergence check skipped (grid too coarse)\n";
    return;
  }
  try {
    const SRESolution half = solve_sre(sre.model(), coarse);
    const double d1 = std::abs(half.p1_initial() / sre.p1_initial() - 1.0);
    const double d2 = std::abs(half.p2_initial() / sre.p2_initial() - 1.0);
    if (std::max(d1, d2) > kGridWarnTolerance) {
      err << "warning: grid-convergence check failed: relative change in P(0) between "
          << coarse.steps << " and " << config.grid.steps
          << " steps is " << format_double(std::max(d1, d2)) << '\n';
    }
  } catch (const SolverError& e) {
    err << "warning: grid-convergence check failed: " << e.what() << '\n';
  }
}

std::optional<double> pick_target(std::optional<double> explicit_target, const RunConfig& config) {
  if (explicit_target) return explicit_target;
  if (!config.frontier.targets.empty()) return config.frontier.targets.front();
  return std::nullopt;
}

json stats_json(const TerminalStats& s) {
  return json{{"paths", s.n},
              {"mean", s.mean},
              {"variance", s.variance},
              {"se_mean", s.se_mean},
              {"se_variance", s.se_var}};
}

json check_json(const StatCheck& c) {
  return json{{"name", c.name},         {"estimate", c.estimate}, {"reference", c.reference},
              {"standard_error", c.se}, {"tolerance", c.tolerance}, {"passed", c.passed}};
}

}  // namespace

void apply_overrides(RunConfig& config, const Overrides& o) {
  if (o.out) config.output_dir = *o.out;
  if (o.seed) config.simulation.config.seed = *o.seed;
  if (o.paths) config.simulation.config.n_paths = *o.paths;
  if (o.grid_steps) config.grid.steps = *o.grid_steps;
  if (o.n_max) config.grid.n_max = *o.n_max;
}

int cmd_solve(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const Solved solved = solve_checked(config, out, err, true);
  if (solved.code != kExitOk) return solved.code;
  grid_convergence_check(config, *solved.sre, err);
  if (!(solved.sre->lemma_ratio() < 1.0)) {
    err << "solver error: P2(0) exp(-2 int r) = " << format_double(solved.sre->lemma_ratio())
        << " is not < 1\n";
    return kExitSolver;
  }
  auto os = open_output(config, "sre.csv");
  write_sre_csv(*solved.sre, os);
  out << "wrote " << (fs::path(config.output_dir) / "sre.csv").string() << '\n';
  return kExitOk;
}

int cmd_frontier(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const Solved solved = solve_checked(config, out, err, false);
  if (solved.code != kExitOk) return solved.code;
  const SRESolution& sre = *solved.sre;
  std::vector<FrontierRow> rows;
  try {
    rows = frontier_table(config.frontier.targets, config.frontier.initial_wealth, sre.model(),
                          {sre.p1_initial(), sre.p2_initial()});
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << '\n';
    return kExitSolver;
  }
  auto os = open_output(config, "frontier.csv");
  os << "z,variance,stddev,zeta_hat,value,riskless_mean,status\n";
  int feasible = 0;
  const std::string nan = format_double(std::nan(""));
  for (const auto& row : rows) {
    os << format_double(row.z) << ',';
    if (row.point) {
      const auto& p = *row.point;
      os << format_double(p.variance) << ',' << format_double(p.stddev()) << ','
         << format_double(p.zeta_hat) << ',' << format_double(p.value) << ','
         << format_double(p.riskless_mean) << ",ok\n";
      ++feasible;
    } else {
      os << nan << ',' << nan << ',' << nan << ',' << nan << ',' << nan << ",infeasible\n";
      err << row.error << '\n';
    }
  }
  out << "frontier: " << feasible << " of " << rows.size() << " targets feasible\n";
  if (feasible == 0) {
    err << "frontier error: no feasible target\n";
    return kExitFrontier;
  }
  return kExitOk;
}

int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const SimulationSpec& spec = config.simulation;
  Strategy strategy = ZeroStrategy{};
  std::shared_ptr<const SRESolution> sre;
  std::optional<MarketModel> model;
  try {
    model.emplace(build_model(config.model));
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << '\n';
    return kExitModel;
  }

  if (spec.strategy.type == "feedback") {
    const Solved solved = solve_checked(config, out, err, false);
    if (solved.code != kExitOk) return solved.code;
    sre = solved.sre;
    const auto target = pick_target(spec.target, config);
    if (!target) {
      err << "frontier error: feedback simulation needs a target (simulation.target or frontier.targets)\n";
      return kExitFrontier;
    }
    try {
      auto policy = std::make_shared<const FeedbackPolicy>(
          make_frontier_policy(*target, config.frontier.initial_wealth, sre));
      strategy = FeedbackStrategy{policy, spec.strategy.pi_scale, spec.strategy.q_scale};
    } catch (const InfeasibleTarget& e) {
      err << "frontier error: " << e.what() << '\n';
      return kExitFrontier;
    } catch (const SolverError& e) {
      err << "solver error: " << e.what() << '\n';
      return kExitSolver;
    }
  } else if (spec.strategy.type == "fixed") {
    const auto& pi = spec.strategy.pi;
    strategy = FixedStrategy{Eigen::Map<const Eigen::VectorXd>(pi.data(), pi.size()),
                             spec.strategy.q};
  }

  SimulationResult result;
  try {
    result = simulate_paths(*model, strategy, spec.config);
  } catch (const InadmissibleStrategy& e) {
    err << "inadmissible strategy: " << e.what() << '\n';
    return kExitModel;
  } catch (const std::invalid_argument& e) {
    err << "simulation error: " << e.what() << '\n';
    return kExitModel;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << '\n';
    return kExitSolver;
  }
  auto os = open_output(config, "simulation.csv");
  write_simulation_csv(result, os);
  if (result.summaries.size() >= 2) {
    const TerminalStats s = estimate_terminal_stats(result);
    out << "paths=" << s.n << " mean=" << format_double(s.mean) << " (se "
        << format_double(s.se_mean) << ") variance=" << format_double(s.variance) << " (se "
        << format_double(s.se_var) << ")\n";
  } else {
    out << "paths=1 X_T=" << format_double(result.summaries.front().terminal) << '\n';
  }
  if (sre) out << "q>1 frequency=" << format_double(q_exceeds_one_frequency(result)) << '\n';
  return kExitOk;
}

int cmd_validate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const SimConfig& sim = config.simulation.config;
  if (sim.n_paths < 2) {
    err << "validate needs at least 2 paths (got " << sim.n_paths << ")\n";
    return kExitUsage;
  }
  const auto target = pick_target(config.validate.target, config);
  if (!target) {
    err << "frontier error: validate needs a target (validate.target or frontier.targets)\n";
    return kExitFrontier;
  }
  const Solved solved = solve_checked(config, out, err, false);
  if (solved.code != kExitOk) return solved.code;

  const double x = config.frontier.initial_wealth;
  ValidationReport rep;
  std::vector<ProbeResult> probes;
  try {
    rep = validate_frontier(solved.sre, x, *target, sim, {config.validate.variance_scale});
    auto policy = std::make_shared<const FeedbackPolicy>(
        make_frontier_policy(*target, x, solved.sre));
    const SecondMoment optimal{rep.second_moment_about_zeta, rep.second_moment_se};
    for (auto [pi_s, q_s] : {std::pair{0.8, 1.0}, std::pair{1.0, 1.2}}) {
      const auto pert = simulate_paths(solved.sre->model(), FeedbackStrategy{policy, pi_s, q_s}, sim);
      ProbeResult p;
      p.pi_scale = pi_s;
      p.q_scale = q_s;
      p.optimal = optimal;
      p.perturbed = second_moment_about(pert, policy->zeta());
      p.passed = p.perturbed.value >= optimal.value - 3.0 * optimal.se;
      probes.push_back(p);
    }
  } catch (const InfeasibleTarget& e) {
    err << "frontier error: " << e.what() << '\n';
    return kExitFrontier;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const InadmissibleStrategy& e) {
    err << "inadmissible strategy: " << e.what() << '\n';
    return kExitModel;
  }

  bool passed = rep.passed;
  json checks = json::array();
  for (const auto& c : rep.checks) checks.push_back(check_json(c));
  json probe_rows = json::array();
  for (const auto& p : probes) {
    passed = passed && p.passed;
    probe_rows.push_back(json{{"pi_scale", p.pi_scale},
                              {"q_scale", p.q_scale},
                              {"optimal", p.optimal.value},
                              {"optimal_se", p.optimal.se},
                              {"perturbed", p.perturbed.value},
                              {"perturbed_se", p.perturbed.se},
                              {"passed", p.passed}});
  }
  const json doc{
      {"target", *target},
      {"initial_wealth", x},
      {"seed", sim.seed},
      {"paths", sim.n_paths},
      {"dt_max", sim.dt_max},
      {"mode", sim.mode == SimMode::Euler ? "euler" : "explicit_product"},
      {"variance_scale", config.validate.variance_scale},
      {"analytic",
       {{"variance", rep.analytic.variance},
        {"zeta_hat", rep.analytic.zeta_hat},
        {"value", rep.analytic.value},
        {"riskless_mean", rep.analytic.riskless_mean}}},
      {"monte_carlo", stats_json(rep.stats)},
      {"second_moment_about_zeta", {{"estimate", rep.second_moment_about_zeta},
                                    {"standard_error", rep.second_moment_se}}},
      {"max_gap", rep.max_gap},
      {"checks", checks},
      {"suboptimality_probes", probe_rows},
      {"passed", passed}};
  {
    auto os = open_output(config, "validation.json");
    os << doc.dump(2) << '\n';
  }
  {
    auto os = open_output(config, "simulation.csv");
    write_simulation_csv(rep.simulation, os);
  }
  for (const auto& c : rep.checks) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name << ": estimate=" << format_double(c.estimate)
        << " reference=" << format_double(c.reference)
        << " tolerance=" << format_double(c.tolerance) << '\n';
  }
  for (const auto& p : probes) {
    out << (p.passed ? "PASS " : "FAIL ") << "probe pi*" << format_double(p.pi_scale) << " q*"
        << format_double(p.q_scale) << ": perturbed=" << format_double(p.perturbed.value)
        << " optimal=" << format_double(p.optimal.value) << '\n';
  }
  if (!passed) {
    err << "validation rejected\n";
    return kExitValidation;
  }
  out << "validation passed\n";
  return kExitOk;
}

}  // namespace mvri
