#pragma once

#include <span>
#include <string>
#include <vector>

namespace mvri {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule with `n` nodes mapped onto [lo, hi].
QuadratureRule gauss_legendre(int n, double lo, double hi);

/// Pairwise (cascade) summation; result is independent of thread layout.
double pairwise_sum(std::span<const double> values);

/// Shortest round-trip decimal representation of `value`.
std::string format_double(double value);

}  // namespace mvri
