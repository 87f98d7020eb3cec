#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mvri {

/// Closed convex cone constraining the investment vector.
///
/// Product cones (full space, orthants, and mixed half-line/line products)
/// are stored as one sign per coordinate: +1 for [0, inf), -1 for (-inf, 0],
/// 0 for the whole line. Finitely generated cones {G c : c >= 0} keep the
/// generator matrix and project by nonnegative least squares.
class ConvexCone {
 public:
  enum class Kind { Full, Nonnegative, Nonpositive, HalfLines, Generated };

  ConvexCone() = default;

  static ConvexCone full(int dim);
  static ConvexCone nonnegative(int dim);
  static ConvexCone nonpositive(int dim);
  static ConvexCone half_lines(std::vector<int> signs);
  static ConvexCone generated(Eigen::MatrixXd generators);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  bool is_product() const { return kind_ != Kind::Generated; }
  const std::vector<int>& signs() const { return signs_; }
  const Eigen::MatrixXd& generators() const { return generators_; }

  bool contains(const Eigen::VectorXd& v, double tol = 1e-10) const;

  /// Euclidean projection onto the cone.
  Eigen::VectorXd project(const Eigen::VectorXd& v) const;

  /// Projection onto the cone intersected with the ball of radius `radius`.
  /// For a closed convex cone this is the cone projection rescaled into the ball.
  Eigen::VectorXd project(const Eigen::VectorXd& v, double radius) const;

  std::string describe() const;

  friend bool operator==(const ConvexCone& a, const ConvexCone& b);

 private:
  Kind kind_ = Kind::Full;
  int dim_ = 0;
  std::vector<int> signs_;
  Eigen::MatrixXd generators_;
};

/// Lawson-Hanson nonnegative least squares: argmin_{c >= 0} |A c - y|.
Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                     int max_iter = 0);

}  // namespace mvri
