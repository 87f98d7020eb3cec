#include "mvri/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mvri/errors.hpp"

namespace mvri {

namespace {

constexpr double kPgTolerance = 1e-10;
constexpr int kPgMaxIterations = 10000;

double pos(double x) { return x > 0.0 ? x : 0.0; }

struct Quadratic {
  Eigen::MatrixXd hessian;  // A = P sigma sigma^T, objective v'Av + 2c'v
  Eigen::VectorXd linear;   // c
};

Quadratic branch_quadratic(Branch branch, const OptimizerInputs& in) {
  const double p = branch == Branch::Positive ? in.p1 : in.p2;
  const Eigen::VectorXd& lam = branch == Branch::Positive ? in.lambda1 : in.lambda2;
  Eigen::VectorXd shifted = p * in.mu;
  if (lam.size() > 0) shifted += in.sigma * lam;
  Quadratic q;
  q.hessian = p * (in.sigma * in.sigma.transpose());
  q.linear = branch == Branch::Positive ? shifted : Eigen::VectorXd(-shifted);
  return q;
}

double quad_value(const Quadratic& q, const Eigen::VectorXd& v) {
  return v.dot(q.hessian * v) + 2.0 * q.linear.dot(v);
}

// Re-solves the problem exactly on the face picked out by the projected
// gradient iterate; accepted only if it satisfies the cone KKT conditions.
bool polish_on_face(const Quadratic& q, const ConvexCone& cone, Eigen::VectorXd& v) {
  const int m = cone.dim();
  const auto& signs = cone.signs();
  std::vector<int> free_idx;
  for (int i = 0; i < m; ++i)
    if (signs[i] == 0 || v[i] != 0.0) free_idx.push_back(i);
  Eigen::VectorXd cand = Eigen::VectorXd::Zero(m);
  if (!free_idx.empty()) {
    const int k = static_cast<int>(free_idx.size());
    Eigen::MatrixXd a(k, k);
    Eigen::VectorXd rhs(k);
    for (int r = 0; r < k; ++r) {
      rhs[r] = -q.linear[free_idx[r]];
      for (int c = 0; c < k; ++c) a(r, c) = q.hessian(free_idx[r], free_idx[c]);
    }
    const Eigen::VectorXd sol = a.ldlt().solve(rhs);
    for (int r = 0; r < k; ++r) cand[free_idx[r]] = sol[r];
  }
  if (!cone.contains(cand, 1e-13)) return false;
  cand = cone.project(cand);
  const Eigen::VectorXd grad = 2.0 * (q.hessian * cand + q.linear);
  const double scale = 1e-9 * std::max(1.0, grad.cwiseAbs().maxCoeff());
  for (int i = 0; i < m; ++i) {
    if (cand[i] != 0.0 || signs[i] == 0) continue;
    if (signs[i] > 0 && grad[i] < -scale) return false;
    if (signs[i] < 0 && grad[i] > scale) return false;
  }
  if (quad_value(q, cand) > quad_value(q, v) + 1e-14 * std::max(1.0, std::abs(quad_value(q, v)))) {
    return false;
  }
  v = cand;
  return true;
}

ConeMinimum projected_gradient(const Quadratic& q, const ConvexCone& cone, double radius,
                               const Eigen::VectorXd& start) {
  const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                          q.hessian, Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .maxCoeff();
  const double lip = 2.0 * lmax;
  const double tol = kPgTolerance * std::max(1.0, 2.0 * q.linear.norm());
  ConeMinimum out;
  Eigen::VectorXd v = cone.project(start, radius);
  int iter = 0;
  double residual = 0.0;
  for (; iter < kPgMaxIterations; ++iter) {
    const Eigen::VectorXd grad = 2.0 * (q.hessian * v + q.linear);
    const Eigen::VectorXd y = cone.project(v - grad / lip, radius);
    const Eigen::VectorXd d = y - v;
    residual = lip * d.norm();
    if (residual <= tol) break;
    const double curvature = d.dot(q.hessian * d);
    const double slope = grad.dot(d);
    double step = 1.0;
    if (curvature > 0.0) step = std::clamp(-slope / (2.0 * curvature), 0.0, 1.0);
    v += step * d;
  }
  if (iter == kPgMaxIterations) {
    std::ostringstream os;
    os << "cone minimization did not converge after " << kPgMaxIterations
       << " iterations (projected-gradient residual " << residual << ")";
    throw SolverError(os.str());
  }
  out.argmin = v;
  out.iterations = iter;
  return out;
}

}  // namespace

OptimizerInputs make_inputs(const MarketModel& model) {
  OptimizerInputs in;
  const auto params = derived_params(model);
  in.intensity = model.insurance().intensity;
  in.b = params.b;
  in.b_y = model.moments().mean;
  in.atoms = model.claims().atoms();
  return in;
}

void check_positivity(const OptimizerInputs& in) {
  if (!(in.p1 > 0.0) || !(in.p2 > 0.0)) throw ModelError("Riccati values must be positive");
  for (std::size_t i = 0; i < in.atoms.size(); ++i) {
    if (!(in.p1 + in.gamma1_at(i) > 0.0) || !(in.p2 + in.gamma2_at(i) > 0.0)) {
      throw ModelError("P + Gamma must be positive at every claim atom");
    }
  }
}

double eval_F(Branch branch, const Eigen::VectorXd& v, const OptimizerInputs& in) {
  return quad_value(branch_quadratic(branch, in), v);
}

ConeMinimum F_star(Branch branch, const OptimizerInputs& in, const ConvexCone& cone,
                   double radius) {
  const Quadratic q = branch_quadratic(branch, in);
  const int m = static_cast<int>(q.linear.size());
  const Eigen::VectorXd unconstrained = q.hessian.ldlt().solve(-q.linear);

  ConeMinimum out;
  if (cone.kind() == ConvexCone::Kind::Full && unconstrained.norm() <= radius) {
    out.argmin = unconstrained;
  } else if (cone.is_product() && m == 1) {
    // One-dimensional convex quadratic: clamp the stationary point.
    out.argmin = cone.project(unconstrained, radius);
  } else {
    out = projected_gradient(q, cone, radius, unconstrained);
    if (cone.is_product() && !std::isfinite(radius)) polish_on_face(q, cone, out.argmin);
  }
  out.value = quad_value(q, out.argmin);
  if (out.value > 0.0) {
    // 0 is feasible with value 0; anything above is round-off.
    out.value = 0.0;
    out.argmin = Eigen::VectorXd::Zero(m);
  }
  return out;
}

double eval_G1(double u, const OptimizerInputs& in) {
  double acc = 0.0;
  for (std::size_t i = 0; i < in.atoms.size(); ++i) {
    const auto& atom = in.atoms[i];
    const double gap = 1.0 - u * atom.size;
    const double plus = pos(gap), minus = pos(-gap);
    acc += atom.weight * ((in.p1 + in.gamma1_at(i)) * (plus * plus - 1.0) +
                          (in.p2 + in.gamma2_at(i)) * minus * minus);
  }
  return in.intensity * acc + 2.0 * u * in.p1 * (in.b + in.intensity * in.b_y);
}

double G1_slope(double u, const OptimizerInputs& in) {
  double acc = 0.0;
  for (std::size_t i = 0; i < in.atoms.size(); ++i) {
    const auto& atom = in.atoms[i];
    const double gap = 1.0 - u * atom.size;
    acc += atom.weight * atom.size *
           (-(in.p1 + in.gamma1_at(i)) * pos(gap) + (in.p2 + in.gamma2_at(i)) * pos(-gap));
  }
  return 2.0 * in.intensity * acc + 2.0 * in.p1 * (in.b + in.intensity * in.b_y);
}

ScalarMinimum G1_star(const OptimizerInputs& in, double u_max) {
  // G1 is strictly convex and C^1 with a piecewise-linear slope whose kinks sit
  // at u = 1/y. Locate the sign change of the slope among the kinks, then solve
  // the affine piece exactly.
  if (G1_slope(0.0, in) >= 0.0 || !(u_max > 0.0)) return {0.0, 0.0};

  std::vector<double> kinks;
  for (const auto& atom : in.atoms)
    if (atom.size > 0.0) kinks.push_back(1.0 / atom.size);
  std::sort(kinks.begin(), kinks.end());
  kinks.erase(std::unique(kinks.begin(), kinks.end()), kinks.end());

  // First kink with nonnegative slope.
  std::size_t lo_k = 0, hi_k = kinks.size();
  while (lo_k < hi_k) {
    const std::size_t mid = (lo_k + hi_k) / 2;
    if (G1_slope(kinks[mid], in) >= 0.0) hi_k = mid;
    else lo_k = mid + 1;
  }
  double root;
  const double left = lo_k == 0 ? 0.0 : kinks[lo_k - 1];
  const double s_left = G1_slope(left, in);
  if (lo_k < kinks.size()) {
    const double right = kinks[lo_k];
    const double s_right = G1_slope(right, in);
    root = left + (right - left) * (-s_left) / (s_right - s_left);
  } else {
    // Past the last kink every atom is in the (uy > 1) regime.
    double curvature = 0.0;
    for (std::size_t i = 0; i < in.atoms.size(); ++i) {
      const auto& atom = in.atoms[i];
      curvature += atom.weight * atom.size * atom.size * (in.p2 + in.gamma2_at(i));
    }
    curvature *= 2.0 * in.intensity;
    if (!(curvature > 0.0)) throw SolverError("G1 minimization: no bracket (flat tail)");
    root = left - s_left / curvature;
  }
  const double u = std::min(std::max(root, 0.0), u_max);
  return {std::min(eval_G1(u, in), 0.0), u};
}

double eval_G2(double u, const OptimizerInputs& in) {
  double quad = 0.0, lin = 0.0;
  for (std::size_t i = 0; i < in.atoms.size(); ++i) {
    const auto& atom = in.atoms[i];
    const double weight = in.intensity * atom.weight * (in.p2 + in.gamma2_at(i));
    quad += weight * atom.size * atom.size;
    lin += weight * atom.size;
  }
  return u * u * quad + 2.0 * u * (lin - in.p2 * (in.b + in.intensity * in.b_y));
}

ScalarMinimum G2_star(const OptimizerInputs& in) {
  double jump_drift = 0.0, denom = 0.0;
  for (std::size_t i = 0; i < in.atoms.size(); ++i) {
    const auto& atom = in.atoms[i];
    jump_drift += in.intensity * atom.weight * in.gamma2_at(i) * atom.size;
    denom += in.intensity * atom.weight * (in.p2 + in.gamma2_at(i)) * atom.size * atom.size;
  }
  if (!(denom > 0.0)) throw ModelError("G2 denominator vanishes (claims a.s. zero)");
  const double num = pos(in.p2 * in.b - jump_drift);
  return {-num * num / denom, num / denom};
}

}  // namespace mvri
