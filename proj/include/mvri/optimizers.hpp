#pragma once

#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mvri/cone.hpp"
#include "mvri/model.hpp"

namespace mvri {

/// Wealth-gap branch: Positive uses (P1, Lambda1), Negative uses (P2, Lambda2).
enum class Branch { Positive = 1, Negative = 2 };

/// Pointwise data entering the Riccati generators at one (t, n).
///
/// Jump increments are given per claim atom; an empty vector means zero and a
/// single entry is broadcast to every atom. The Brownian components
/// Lambda1/Lambda2 are carried for the general formulas but are zero for all
/// coefficient regimes this library solves.
struct OptimizerInputs {
  double p1 = 1.0;
  double p2 = 1.0;
  std::vector<double> gamma1;
  std::vector<double> gamma2;
  Eigen::VectorXd lambda1;  // size n_W or empty (= 0)
  Eigen::VectorXd lambda2;
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  double intensity = 1.0;  // lambda
  double b = 0.0;
  double b_y = 0.0;
  std::span<const ClaimAtom> atoms;

  double gamma1_at(std::size_t i) const { return pick(gamma1, i); }
  double gamma2_at(std::size_t i) const { return pick(gamma2, i); }

 private:
  static double pick(const std::vector<double>& g, std::size_t i) {
    if (g.empty()) return 0.0;
    return g.size() == 1 ? g.front() : g[i];
  }
};

/// Fills the insurance/claim fields from a model; market fields left empty.
OptimizerInputs make_inputs(const MarketModel& model);

/// Throws ModelError unless P_i > 0 and P_i + Gamma_i > 0 at every atom.
void check_positivity(const OptimizerInputs& in);

struct ConeMinimum {
  double value = 0.0;
  Eigen::VectorXd argmin;
  int iterations = 0;
};

struct ScalarMinimum {
  double value = 0.0;
  double argmin = 0.0;
};

constexpr double kUnbounded = std::numeric_limits<double>::infinity();

double eval_F(Branch branch, const Eigen::VectorXd& v, const OptimizerInputs& in);

/// inf over the cone (optionally intersected with |v| <= radius) of eval_F.
ConeMinimum F_star(Branch branch, const OptimizerInputs& in, const ConvexCone& cone,
                   double radius = kUnbounded);

double eval_G1(double u, const OptimizerInputs& in);
/// dG1/du; G1 is C^1 in u with a piecewise-linear derivative.
double G1_slope(double u, const OptimizerInputs& in);

/// inf over 0 <= u <= u_max of eval_G1.
ScalarMinimum G1_star(const OptimizerInputs& in, double u_max = kUnbounded);

/// Quadratic reinsurance map of the negative branch.
double eval_G2(double u, const OptimizerInputs& in);

/// Closed-form inf over u >= 0 of eval_G2.
ScalarMinimum G2_star(const OptimizerInputs& in);

}  // namespace mvri
