#include "mvri/cone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mvri/errors.hpp"

namespace mvri {

ConvexCone ConvexCone::full(int dim) {
  ConvexCone c;
  c.kind_ = Kind::Full;
  c.dim_ = dim;
  c.signs_.assign(dim, 0);
  return c;
}

ConvexCone ConvexCone::nonnegative(int dim) {
  ConvexCone c;
  c.kind_ = Kind::Nonnegative;
  c.dim_ = dim;
  c.signs_.assign(dim, 1);
  return c;
}

ConvexCone ConvexCone::nonpositive(int dim) {
  ConvexCone c;
  c.kind_ = Kind::Nonpositive;
  c.dim_ = dim;
  c.signs_.assign(dim, -1);
  return c;
}

ConvexCone ConvexCone::half_lines(std::vector<int> signs) {
  for (int s : signs) {
    if (s < -1 || s > 1) throw ModelError("cone sign must be -1, 0 or +1");
  }
  ConvexCone c;
  c.kind_ = Kind::HalfLines;
  c.dim_ = static_cast<int>(signs.size());
  c.signs_ = std::move(signs);
  return c;
}

ConvexCone ConvexCone::generated(Eigen::MatrixXd generators) {
  if (generators.rows() == 0 || generators.cols() == 0) {
    throw ModelError("generated cone needs a nonempty generator matrix");
  }
  if (!generators.allFinite()) throw ModelError("cone generators must be finite");
  ConvexCone c;
  c.kind_ = Kind::Generated;
  c.dim_ = static_cast<int>(generators.rows());
  c.generators_ = std::move(generators);
  return c;
}

bool ConvexCone::contains(const Eigen::VectorXd& v, double tol) const {
  if (v.size() != dim_) return false;
  if (is_product()) {
    for (int i = 0; i < dim_; ++i) {
      if (signs_[i] > 0 && v[i] < -tol) return false;
      if (signs_[i] < 0 && v[i] > tol) return false;
    }
    return true;
  }
  const Eigen::VectorXd p = project(v);
  return (p - v).norm() <= tol * std::max(1.0, v.norm());
}

Eigen::VectorXd ConvexCone::project(const Eigen::VectorXd& v) const {
  if (is_product()) {
    Eigen::VectorXd p = v;
    for (int i = 0; i < dim_; ++i) {
      if (signs_[i] > 0) p[i] = std::max(p[i], 0.0);
      if (signs_[i] < 0) p[i] = std::min(p[i], 0.0);
    }
    return p;
  }
  return generators_ * nnls(generators_, v);
}

Eigen::VectorXd ConvexCone::project(const Eigen::VectorXd& v, double radius) const {
  Eigen::VectorXd p = project(v);
  const double n = p.norm();
  if (std::isfinite(radius) && n > radius) p *= radius / n;
  return p;
}

std::string ConvexCone::describe() const {
  switch (kind_) {
    case Kind::Full: return "full";
    case Kind::Nonnegative: return "nonnegative";
    case Kind::Nonpositive: return "nonpositive";
    case Kind::HalfLines: return "half_lines";
    case Kind::Generated: return "generated";
  }
  return "unknown";
}

bool operator==(const ConvexCone& a, const ConvexCone& b) {
  if (a.kind_ != b.kind_ || a.dim_ != b.dim_ || a.signs_ != b.signs_) return false;
  if (a.generators_.rows() != b.generators_.rows() ||
      a.generators_.cols() != b.generators_.cols()) {
    return false;
  }
  return a.generators_ == b.generators_;
}

Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                     int max_iter) {
  const int n = static_cast<int>(a.cols());
  if (max_iter <= 0) max_iter = 30 * n + 30;
  const double tol = 1e-12 * std::max(1.0, a.norm() * y.norm());

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(n, false);
  Eigen::VectorXd w = a.transpose() * (y - a * x);

  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<int> idx;
    for (int j = 0; j < n; ++j)
      if (passive[j]) idx.push_back(j);
    z = Eigen::VectorXd::Zero(n);
    if (idx.empty()) return;
    Eigen::MatrixXd ap(a.rows(), idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) ap.col(k) = a.col(idx[k]);
    const Eigen::VectorXd zp = ap.colPivHouseholderQr().solve(y);
    for (std::size_t k = 0; k < idx.size(); ++k) z[idx[k]] = zp[k];
  };

  for (int outer = 0; outer < max_iter; ++outer) {
    int best = -1;
    double best_w = tol;
    for (int j = 0; j < n; ++j) {
      if (!passive[j] && w[j] > best_w) {
        best_w = w[j];
        best = j;
      }
    }
    if (best < 0) break;
    passive[best] = true;

    Eigen::VectorXd z;
    for (int inner = 0; inner < max_iter; ++inner) {
      solve_passive(z);
      bool feasible = true;
      for (int j = 0; j < n; ++j)
        if (passive[j] && z[j] <= 0.0) feasible = false;
      if (feasible) break;
      double alpha = std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) {
        if (passive[j] && z[j] <= 0.0) alpha = std::min(alpha, x[j] / (x[j] - z[j]));
      }
      x += alpha * (z - x);
      for (int j = 0; j < n; ++j) {
        if (passive[j] && std::abs(x[j]) <= 1e-15) {
          passive[j] = false;
          x[j] = 0.0;
        }
      }
    }
    x = z;
    w = a.transpose() * (y - a * x);
  }
  return x;
}

}  // namespace mvri
