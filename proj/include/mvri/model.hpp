#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mvri/cone.hpp"

namespace mvri {

enum class Interp { PiecewiseConstant, PiecewiseLinear };

/// Time-indexed coefficient table.
///
/// Piecewise-constant tables hold values[i] on [times[i], times[i+1]) and the
/// last value from times.back() on. Piecewise-linear tables interpolate
/// between knots. Both extrapolate flat outside the knot range.
template <typename Value>
class TimeTable {
 public:
  TimeTable() : times_{0.0}, values_(1) {}
  explicit TimeTable(Value constant) : times_{0.0}, values_{std::move(constant)} {}
  TimeTable(std::vector<double> times, std::vector<Value> values, Interp interp);

  Value operator()(double t) const;

  const std::vector<double>& times() const { return times_; }
  const std::vector<Value>& values() const { return values_; }
  Interp interp() const { return interp_; }
  bool is_constant() const { return values_.size() == 1; }

 private:
  std::vector<double> times_;
  std::vector<Value> values_;
  Interp interp_ = Interp::PiecewiseConstant;
};

using ScalarTable = TimeTable<double>;
using VectorTable = TimeTable<Eigen::VectorXd>;
using MatrixTable = TimeTable<Eigen::MatrixXd>;

bool operator==(const ScalarTable& a, const ScalarTable& b);
bool operator==(const VectorTable& a, const VectorTable& b);
bool operator==(const MatrixTable& a, const MatrixTable& b);

/// Exact integral of a scalar table over [t0, t1].
double integrate(const ScalarTable& table, double t0, double t1);

/// Exact integral of |table| over [t0, t1].
double integrate_abs(const ScalarTable& table, double t0, double t1);

struct ClaimAtom {
  double size;
  double weight;
  friend bool operator==(const ClaimAtom&, const ClaimAtom&) = default;
};

/// Bounded claim-size law, reduced to a finite atom list.
class ClaimDistribution {
 public:
  enum class Kind { DiscreteAtoms, ContinuousDensity };

  static ClaimDistribution point_mass(double size);
  static ClaimDistribution from_atoms(std::vector<ClaimAtom> atoms);
  /// Density on [0, y_max] reduced to a Gauss-Legendre atom list.
  static ClaimDistribution from_density(const std::function<double(double)>& pdf,
                                        double y_max, int nodes = 64);

  Kind kind() const { return kind_; }
  std::span<const ClaimAtom> atoms() const { return atoms_; }
  double y_max() const { return y_max_; }

  /// Inverse-CDF draw from a uniform in (0, 1).
  double sample(double uniform) const;

  friend bool operator==(const ClaimDistribution& a, const ClaimDistribution& b) {
    return a.kind_ == b.kind_ && a.atoms_ == b.atoms_ && a.y_max_ == b.y_max_;
  }

 private:
  Kind kind_ = Kind::DiscreteAtoms;
  std::vector<ClaimAtom> atoms_;
  std::vector<double> cdf_;
  double y_max_ = 0.0;

  void finalize();
};

struct ClaimMoments {
  double mean;           // b_Y
  double second_moment;  // sigma_Y^2
};

ClaimMoments claim_moments(const ClaimDistribution& claims);

enum class CoefficientMode { Deterministic, CountModulated };

struct InsuranceTerms {
  double intensity = 1.0;            // lambda
  double loading = 0.2;              // eta
  double reinsurance_loading = 0.2;  // eta_r
  friend bool operator==(const InsuranceTerms&, const InsuranceTerms&) = default;
};

/// Problem instance: market coefficients, cone, insurance terms, claim law.
///
/// Drift and volatility are indexed by claim-count level; in deterministic
/// mode there is exactly one level. Levels past the last supplied table reuse
/// the last one.
class MarketModel {
 public:
  MarketModel(double horizon, ScalarTable rate, std::vector<VectorTable> drift,
              std::vector<MatrixTable> volatility, ConvexCone cone,
              InsuranceTerms insurance, ClaimDistribution claims,
              CoefficientMode mode, double ellipticity_floor = 1e-10);

  double horizon() const { return horizon_; }
  int assets() const { return assets_; }
  int brownian_dim() const { return brownian_dim_; }
  CoefficientMode mode() const { return mode_; }
  int coefficient_levels() const { return static_cast<int>(drift_.size()); }
  const ConvexCone& cone() const { return cone_; }
  const InsuranceTerms& insurance() const { return insurance_; }
  const ClaimDistribution& claims() const { return claims_; }
  const ClaimMoments& moments() const { return moments_; }
  double ellipticity_floor() const { return ellipticity_floor_; }

  const ScalarTable& rate_table() const { return rate_; }
  const std::vector<VectorTable>& drift_tables() const { return drift_; }
  const std::vector<MatrixTable>& volatility_tables() const { return volatility_; }

  double r(double t) const { return rate_(t); }
  Eigen::VectorXd mu(double t, int n) const;
  Eigen::MatrixXd sigma(double t, int n) const;

  /// int_{t0}^{t1} r(s) ds.
  double rate_integral(double t0, double t1) const { return integrate(rate_, t0, t1); }

  /// Union of all coefficient knots inside [0, T], plus 0 and T.
  std::vector<double> knot_times() const;

 private:
  double horizon_;
  ScalarTable rate_;
  std::vector<VectorTable> drift_;
  std::vector<MatrixTable> volatility_;
  ConvexCone cone_;
  InsuranceTerms insurance_;
  ClaimDistribution claims_;
  ClaimMoments moments_{};
  CoefficientMode mode_;
  double ellipticity_floor_;
  int assets_ = 0;
  int brownian_dim_ = 0;
};

struct DerivedParams {
  double b;  // lambda b_Y eta_r
  double a;  // lambda b_Y (eta - eta_r)
  double p;  // (1 + eta) lambda b_Y
};

DerivedParams derived_params(const MarketModel& model);

struct ModelDiagnostics {
  bool ok = true;
  double delta_hat = 0.0;  // min eigenvalue of sigma sigma^T over the sample grid
  double rate_bound = 0.0;
  double drift_bound = 0.0;
  double volatility_bound = 0.0;
  double claim_support = 0.0;
  std::vector<std::string> violations;
};

/// Checks the model invariants on a (t, n) sample grid.
ModelDiagnostics validate_model(const MarketModel& model, int time_samples = 101);

}  // namespace mvri
