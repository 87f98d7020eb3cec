#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mvri/model.hpp"
#include "mvri/montecarlo.hpp"
#include "mvri/sre.hpp"

namespace mvri {

/// Piecewise table as written in the config file. A single value at t=0 may
/// be written as a bare number (scalar/vector) or bare array (matrix).
template <typename Value>
struct TableSpec {
  std::vector<double> times{0.0};
  std::vector<Value> values;
  Interp interp = Interp::PiecewiseConstant;
  friend bool operator==(const TableSpec&, const TableSpec&) = default;
};

using ScalarSpec = TableSpec<double>;
using VectorSpec = TableSpec<std::vector<double>>;
using MatrixSpec = TableSpec<std::vector<std::vector<double>>>;  // row-major

struct ConeSpec {
  std::string type = "nonnegative";  // full | nonnegative | nonpositive | half_lines | generated
  std::vector<int> signs;                       // half_lines
  std::vector<std::vector<double>> generators;  // generated: one vector per generator
  friend bool operator==(const ConeSpec&, const ConeSpec&) = default;
};

struct ClaimSpec {
  std::string type = "point";  // point | atoms | uniform | truncated_exponential
  double size = 1.0;           // point
  std::vector<double> sizes;   // atoms
  std::vector<double> weights;
  double max = 1.0;   // uniform, truncated_exponential: support [0, max]
  double rate = 1.0;  // truncated_exponential
  int nodes = 64;
  friend bool operator==(const ClaimSpec&, const ClaimSpec&) = default;
};

struct ModelSpec {
  double horizon = 1.0;
  CoefficientMode mode = CoefficientMode::Deterministic;
  ScalarSpec interest_rate{{0.0}, {0.05}};
  std::vector<VectorSpec> drift{{{0.0}, {{0.2}}}};                // one entry per level
  std::vector<MatrixSpec> volatility{{{0.0}, {{{0.3}}}}};         // one entry per level
  ConeSpec cone;
  double claim_intensity = 1.0;
  double safety_loading = 0.2;
  double reinsurance_loading = 0.2;
  ClaimSpec claims;
  double ellipticity_floor = 1e-10;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct StrategySpec {
  std::string type = "feedback";  // feedback | zero | fixed
  std::vector<double> pi;         // fixed
  double q = 0.0;                 // fixed
  double pi_scale = 1.0;          // feedback
  double q_scale = 1.0;
  friend bool operator==(const StrategySpec&, const StrategySpec&) = default;
};

struct FrontierSpec {
  double initial_wealth = 1.0;
  std::vector<double> targets;
  friend bool operator==(const FrontierSpec&, const FrontierSpec&) = default;
};

struct SimulationSpec {
  SimConfig config;
  StrategySpec strategy;
  /// Target mean for the feedback strategy; defaults to the first frontier target.
  std::optional<double> target;
  friend bool operator==(const SimulationSpec&, const SimulationSpec&) = default;
};

struct ValidateSpec {
  std::optional<double> target;  // defaults to the first frontier target
  double variance_scale = 1.0;
  friend bool operator==(const ValidateSpec&, const ValidateSpec&) = default;
};

struct RunConfig {
  ModelSpec model;
  SREGrid grid;
  FrontierSpec frontier;
  SimulationSpec simulation;
  ValidateSpec validate;
  std::string output_dir = ".";
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses JSON text; throws ConfigError on malformed or unknown fields.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
/// Canonical JSON; parse_config(dump_config(c)) == c.
std::string dump_config(const RunConfig& config);

/// Builds the model; throws ModelError on shape or law errors.
MarketModel build_model(const ModelSpec& spec);

}  // namespace mvri
