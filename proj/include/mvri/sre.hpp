#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mvri/model.hpp"
#include "mvri/optimizers.hpp"

namespace mvri {

struct SREGrid {
  int steps = 2000;
  /// Claim-count truncation; defaults to the smallest level with Poisson
  /// tail P(N_T > n_max) below `tail_probability`. Ignored in deterministic mode.
  std::optional<int> n_max;
  double tail_probability = 1e-8;
  friend bool operator==(const SREGrid&, const SREGrid&) = default;
};

/// Uniform-positivity bounds: lower = exp(-c1 T), upper = exp(int 2|r|).
struct BoundsCertificate {
  double c1 = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

BoundsCertificate bounds_certificate(const MarketModel& model, const std::vector<double>& times);

/// Number of claim-count levels minus one used by the solver.
int resolve_n_max(const MarketModel& model, const SREGrid& grid);

/// One Riccati component, stored as U = ln P over (time node, level).
class RiccatiTable {
 public:
  RiccatiTable() = default;
  RiccatiTable(std::vector<double> times, int levels);

  const std::vector<double>& times() const { return times_; }
  int nodes() const { return static_cast<int>(times_.size()); }
  int levels() const { return levels_; }

  double log_p(int node, int n) const { return log_p_[index(node, n)]; }
  double log_rate(int node, int n) const { return log_rate_[index(node, n)]; }
  double p(int node, int n) const;
  /// P(t, n+1) - P(t, n), with Gamma = 0 at the top level.
  double gamma(int node, int n) const;

  /// ln P(t, n) by cubic Hermite interpolation on the stored slopes.
  double log_p_hermite(double t, int n) const;
  /// ln P(t, n) by linear interpolation.
  double log_p_linear(double t, int n) const;

  void set(int node, int n, double log_p, double log_rate);

 private:
  std::size_t index(int node, int n) const {
    return static_cast<std::size_t>(node) * levels_ + n;
  }
  std::size_t locate(double t) const;

  std::vector<double> times_;
  int levels_ = 0;
  std::vector<double> log_p_;
  std::vector<double> log_rate_;
};

/// Backward solve of the negative-branch equation, all levels.
RiccatiTable solve_P2(const MarketModel& model, const SREGrid& grid);

/// Backward solve of the positive-branch equation given the solved P2.
RiccatiTable solve_P1(const MarketModel& model, const SREGrid& grid, const RiccatiTable& p2);

/// Positive-branch solve with inner minimizations restricted to |v| <= k, u <= k.
RiccatiTable solve_truncated(int k, const MarketModel& model, const SREGrid& grid,
                             const RiccatiTable& p2);

/// Optimizer outputs cached at one (node, level).
struct NodeOptima {
  Eigen::VectorXd v1, v2;
  double u1 = 0.0, u2 = 0.0;
  double f1 = 0.0, f2 = 0.0, g1 = 0.0, g2 = 0.0;
};

/// Full solution of the Riccati pair. The Brownian components are
/// identically zero for every coefficient regime this solver accepts.
class SRESolution {
 public:
  SRESolution(MarketModel model, RiccatiTable p1, RiccatiTable p2, BoundsCertificate cert);

  const MarketModel& model() const { return model_; }
  const std::vector<double>& times() const { return p1_.times(); }
  int nodes() const { return p1_.nodes(); }
  int n_max() const { return p1_.levels() - 1; }

  double p1(int node, int n) const { return p1_.p(node, n); }
  double p2(int node, int n) const { return p2_.p(node, n); }
  double gamma1(int node, int n) const { return p1_.gamma(node, n); }
  double gamma2(int node, int n) const { return p2_.gamma(node, n); }
  const NodeOptima& optima(int node, int n) const {
    return optima_[static_cast<std::size_t>(node) * p1_.levels() + n];
  }
  const RiccatiTable& table1() const { return p1_; }
  const RiccatiTable& table2() const { return p2_; }
  const BoundsCertificate& certificate() const { return cert_; }

  double p1_initial() const { return p1(0, 0); }
  double p2_initial() const { return p2(0, 0); }
  /// P2(0) exp(-2 int r); strictly below one on any valid solution.
  double lemma_ratio() const;

 private:
  MarketModel model_;
  RiccatiTable p1_, p2_;
  BoundsCertificate cert_;
  std::vector<NodeOptima> optima_;
};

/// Solves P2 then P1 and checks the bounds certificate at every node.
SRESolution solve_sre(const MarketModel& model, const SREGrid& grid);

struct SREState {
  double p1 = 1.0, p2 = 1.0, gamma1 = 0.0, gamma2 = 0.0;
  Eigen::VectorXd v1, v2;
  double u1 = 0.0, u2 = 0.0;
};

/// Solution at arbitrary t in [0, T] and level n <= n_max: ln P linear in t,
/// argmins recomputed at the interpolated values.
SREState sre_at(const SRESolution& solution, double t, int n);

/// Pointwise optimizer outputs for given (P, Gamma) at (t, n).
SREState optimize_at(const MarketModel& model, double t, int n, double p1, double gamma1,
                     double p2, double gamma2);

/// Writes the t-major, n-minor solution table.
void write_sre_csv(const SRESolution& solution, std::ostream& os);

}  // namespace mvri
