#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mvri/model.hpp"
#include "mvri/policy.hpp"

namespace mvri {

enum class SimMode { Euler, ExplicitProduct };

struct SimConfig {
  int n_paths = 10000;
  std::uint64_t seed = 42;
  double dt_max = 0.01;
  SimMode mode = SimMode::ExplicitProduct;
  bool record_paths = false;
  int threads = 0;  // 0: hardware concurrency
  /// Starting wealth for zero and fixed strategies; feedback policies carry their own.
  double initial_wealth = 1.0;
  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct ZeroStrategy {};

struct FixedStrategy {
  Eigen::VectorXd pi;
  double q = 0.0;
};

/// Feedback policy with optional multiplicative perturbation of both controls.
struct FeedbackStrategy {
  std::shared_ptr<const FeedbackPolicy> policy;
  double pi_scale = 1.0;
  double q_scale = 1.0;
};

using Strategy = std::variant<ZeroStrategy, FixedStrategy, FeedbackStrategy>;

/// Full trajectory of one path; controls are the values applied on [times[i], times[i+1]).
struct PathRecord {
  std::vector<double> claim_times;
  std::vector<double> claim_sizes;
  std::vector<double> times;
  std::vector<double> wealth;
  std::vector<Eigen::VectorXd> pi;
  std::vector<double> q;
  double terminal = 0.0;
};

/// Per-path statistics kept regardless of `record_paths`.
struct PathSummary {
  double terminal = 0.0;
  int claims = 0;
  /// max of X - h over grid, claim and terminal times (feedback only; -inf otherwise).
  double max_gap = 0.0;
  /// Lebesgue measure of {t : q_t > 1}.
  double q_above_one_time = 0.0;
};

struct SimulationResult {
  std::vector<PathSummary> summaries;
  std::vector<PathRecord> paths;  // empty unless record_paths
  double horizon = 0.0;

  std::vector<double> terminals() const;
};

SimulationResult simulate_paths(const MarketModel& model, const Strategy& strategy,
                                const SimConfig& config);

struct TerminalStats {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double se_mean = 0.0;
  double se_var = 0.0;  // fourth-moment formula
};

/// Requires at least two samples.
TerminalStats estimate_terminal_stats(std::span<const double> samples);
TerminalStats estimate_terminal_stats(const SimulationResult& result);

/// Fraction of path-time with q > 1.
double q_exceeds_one_frequency(const SimulationResult& result);
double q_exceeds_one_frequency(std::span<const PathRecord> records);

struct StatCheck {
  std::string name;
  double estimate = 0.0;
  double reference = 0.0;
  double se = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct ValidationOptions {
  /// Multiplies the analytic variance before comparison (rejection-path hook).
  double variance_scale = 1.0;
};

struct ValidationReport {
  double z = 0.0;
  FrontierPoint analytic;
  TerminalStats stats;
  double second_moment_about_zeta = 0.0;  // E[(X_T - zeta)^2]
  double second_moment_se = 0.0;
  double max_gap = 0.0;
  std::vector<StatCheck> checks;
  bool passed = false;
  SimulationResult simulation;
};

ValidationReport validate_frontier(std::shared_ptr<const SRESolution> sre, double x, double z,
                                   const SimConfig& config, const ValidationOptions& options = {});

/// Monte Carlo E[(X_T - zeta)^2] and its standard error.
struct SecondMoment {
  double value = 0.0;
  double se = 0.0;
};

SecondMoment second_moment_about(const SimulationResult& result, double zeta);

/// Perturbed feedback vs optimal run on common random numbers.
struct ProbeResult {
  double pi_scale = 1.0;
  double q_scale = 1.0;
  SecondMoment optimal;
  SecondMoment perturbed;
  bool passed = false;  // perturbed >= optimal - 3 se(optimal)
};

ProbeResult suboptimality_probe(const std::shared_ptr<const FeedbackPolicy>& policy,
                                double pi_scale, double q_scale, const SimConfig& config);

/// path,n_claims,X_T rows in path order.
void write_simulation_csv(const SimulationResult& result, std::ostream& os);

}  // namespace mvri
