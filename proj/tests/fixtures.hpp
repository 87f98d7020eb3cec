#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mvri/model.hpp"

namespace fixtures {

using mvri::ClaimDistribution;
using mvri::CoefficientMode;
using mvri::ConvexCone;
using mvri::InsuranceTerms;
using mvri::MarketModel;
using mvri::MatrixTable;
using mvri::ScalarTable;
using mvri::VectorTable;

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline Eigen::MatrixXd mat1(double s) { return Eigen::MatrixXd::Constant(1, 1, s); }

/// m = n = 1, r = 0.05, mu = 0.2, sigma = 0.3, lambda = 1, Y = 1, eta = eta_r = 0.2, T = 1.
inline MarketModel constants_model(ConvexCone cone = ConvexCone::nonnegative(1), double r = 0.05,
                                   double eta = 0.2, double eta_r = 0.2) {
  return MarketModel(1.0, ScalarTable(r), {VectorTable(vec({0.2}))}, {MatrixTable(mat1(0.3))},
                     std::move(cone), InsuranceTerms{1.0, eta, eta_r},
                     ClaimDistribution::point_mass(1.0), CoefficientMode::Deterministic);
}

/// Drift 0.2 before the first claim, 0 afterwards; Pi = R.
inline MarketModel count_modulated_model() {
  return MarketModel(1.0, ScalarTable(0.05),
                     {VectorTable(vec({0.2})), VectorTable(vec({0.0}))},
                     {MatrixTable(mat1(0.3)), MatrixTable(mat1(0.3))}, ConvexCone::full(1),
                     InsuranceTerms{1.0, 0.2, 0.2}, ClaimDistribution::point_mass(1.0),
                     CoefficientMode::CountModulated);
}

/// Two assets, two Brownian motions, no shorting, two-atom claims, time-varying rate.
inline MarketModel two_asset_model() {
  Eigen::MatrixXd sigma(2, 2);
  sigma << 0.25, 0.0, 0.05, 0.2;
  ScalarTable rate({0.0, 0.5}, {0.03, 0.06}, mvri::Interp::PiecewiseConstant);
  return MarketModel(1.0, rate, {VectorTable(vec({0.1, -0.02}))}, {MatrixTable(sigma)},
                     ConvexCone::nonnegative(2), InsuranceTerms{2.0, 0.15, 0.3},
                     ClaimDistribution::from_atoms({{0.5, 0.6}, {1.5, 0.4}}),
                     CoefficientMode::Deterministic);
}

}  // namespace fixtures
