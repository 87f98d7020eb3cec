#pragma once

#include <stdexcept>
#include <string>

namespace mvri {

/// Invalid problem instance (claim law, coefficients, loadings, cone).
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure in an optimizer or the Riccati integrator.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Target mean below the riskless vertex of the frontier.
class InfeasibleTarget : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A strategy produced a control outside the admissible set.
class InadmissibleStrategy : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed run configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace mvri
