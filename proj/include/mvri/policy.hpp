#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mvri/model.hpp"
#include "mvri/sre.hpp"

namespace mvri {

/// int_{t0}^{t1} exp(-int_{t0}^{s} r du) ds, exact for piecewise-constant r.
double discount_integral(const MarketModel& model, double t0, double t1);

/// h_t = zeta exp(-int_t^T r) - a int_t^T exp(-int_t^s r du) ds.
double h_value(double zeta, const MarketModel& model, double t);
std::vector<double> h_path(double zeta, const MarketModel& model, const std::vector<double>& times);

/// Vertex of the frontier: x exp(int_0^T r) + a int_0^T exp(int_t^T r) dt.
double riskless_mean(double x, const MarketModel& model);

/// Optimal multiplier for target mean z.
double zeta_hat(double z, double x, const MarketModel& model, double p2_0);

/// Value of the relaxed problem for multiplier zeta.
double relaxed_value(double zeta, double x, double z, double p1_0, double p2_0,
                     const MarketModel& model);

struct Controls {
  Eigen::VectorXd pi;
  double q = 0.0;
};

/// Linear feedback in the wealth gap X - h_t.
class FeedbackPolicy {
 public:
  FeedbackPolicy(std::shared_ptr<const SRESolution> sre, double zeta, double x,
                 std::optional<double> target = std::nullopt);

  double zeta() const { return zeta_; }
  double initial_wealth() const { return x_; }
  std::optional<double> target() const { return target_; }
  const SRESolution& sre() const { return *sre_; }
  std::shared_ptr<const SRESolution> sre_ptr() const { return sre_; }
  const MarketModel& model() const { return sre_->model(); }

  double h(double t) const { return h_value(zeta_, model(), t); }
  /// h on the SRE time grid.
  const std::vector<double>& h_table() const { return h_table_; }

 private:
  std::shared_ptr<const SRESolution> sre_;
  double zeta_;
  double x_;
  std::optional<double> target_;
  std::vector<double> h_table_;
};

/// Frontier policy for target z (multiplier zeta_hat).
FeedbackPolicy make_frontier_policy(double z, double x, std::shared_ptr<const SRESolution> sre);

/// Controls from precomputed argmins and the current gap X - h.
Controls feedback_from_state(const SREState& state, double gap);

/// (pi_hat, q_hat) at (t, n, X); levels above n_max use the n_max closure.
Controls feedback_controls(double t, int n, double wealth, const FeedbackPolicy& policy);

struct FrontierPoint {
  double z = 0.0;
  double variance = 0.0;
  double zeta_hat = 0.0;
  double value = 0.0;  // J(zeta_hat)
  double riskless_mean = 0.0;
  double stddev() const;
};

struct InitialRiccati {
  double p1 = 1.0;
  double p2 = 1.0;
};

FrontierPoint frontier_variance(double z, double x, const MarketModel& model,
                                const InitialRiccati& initial);

struct FrontierRow {
  double z = 0.0;
  std::optional<FrontierPoint> point;
  std::string error;
};

std::vector<FrontierRow> frontier_table(const std::vector<double>& z_list, double x,
                                        const MarketModel& model, const InitialRiccati& initial);

}  // namespace mvri
