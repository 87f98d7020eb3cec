#include "mvri/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mvri/errors.hpp"
#include "mvri/numerics.hpp"

namespace mvri {

double discount_integral(const MarketModel& model, double t0, double t1) {
  if (t1 <= t0) return 0.0;
  const ScalarTable& rate = model.rate_table();
  std::vector<double> cuts{t0};
  for (double k : rate.times())
    if (k > t0 && k < t1) cuts.push_back(k);
  cuts.push_back(t1);

  static const QuadratureRule unit = gauss_legendre(16, 0.0, 1.0);
  double total = 0.0;
  double accumulated = 0.0;  // int_{t0}^{a} r
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    const double len = b - a;
    if (rate.interp() == Interp::PiecewiseConstant || rate.is_constant()) {
      const double r = rate(0.5 * (a + b));
      const double piece = std::abs(r * len) < 1e-12 ? len * (1.0 - 0.5 * r * len)
                                                      : -std::expm1(-r * len) / r;
      total += std::exp(-accumulated) * piece;
      accumulated += r * len;
    } else {
      const double ra = rate(a), rb = rate(b);
      const double slope = (rb - ra) / len;
      double piece = 0.0;
      for (std::size_t q = 0; q < unit.nodes.size(); ++q) {
        const double ds = unit.nodes[q] * len;
        piece += unit.weights[q] * len * std::exp(-(ra * ds + 0.5 * slope * ds * ds));
      }
      total += std::exp(-accumulated) * piece;
      accumulated += 0.5 * (ra + rb) * len;
    }
  }
  return total;
}

double h_value(double zeta, const MarketModel& model, double t) {
  const double horizon = model.horizon();
  const double a = derived_params(model).a;
  const double disc = std::exp(-model.rate_integral(t, horizon));
  const double annuity = a == 0.0 ? 0.0 : discount_integral(model, t, horizon);
  return zeta * disc - a * annuity;
}

std::vector<double> h_path(double zeta, const MarketModel& model, const std::vector<double>& times) {
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(h_value(zeta, model, t));
  return out;
}

namespace {

// x + a int_0^T exp(-int_0^t r) dt, the initial wealth plus discounted loading drag.
double adjusted_wealth(double x, const MarketModel& model) {
  const double a = derived_params(model).a;
  return x + (a == 0.0 ? 0.0 : a * discount_integral(model, 0.0, model.horizon()));
}

}  // namespace

double riskless_mean(double x, const MarketModel& model) {
  return std::exp(model.rate_integral(0.0, model.horizon())) * adjusted_wealth(x, model);
}

double zeta_hat(double z, double x, const MarketModel& model, double p2_0) {
  const double vertex = riskless_mean(x, model);
  if (z < vertex - 1e-12 * std::max(1.0, std::abs(vertex))) {
    std::ostringstream os;
    os << "infeasible target: z=" << z << " is below the riskless mean " << vertex;
    throw InfeasibleTarget(os.str());
  }
  const double growth = model.rate_integral(0.0, model.horizon());
  const double ratio = p2_0 * std::exp(-2.0 * growth);
  if (ratio - 1.0 >= 0.0) {
    std::ostringstream os;
    os << "frontier ratio violated: P2(0) exp(-2 int r) = " << ratio << " is not < 1";
    throw SolverError(os.str());
  }
  const double numerator = p2_0 * std::exp(-growth) * adjusted_wealth(x, model) - z;
  return numerator / (ratio - 1.0);
}

double relaxed_value(double zeta, double x, double z, double p1_0, double p2_0,
                     const MarketModel& model) {
  const double gap = x - h_value(zeta, model, 0.0);
  const double plus = std::max(gap, 0.0), minus = std::max(-gap, 0.0);
  return p1_0 * plus * plus + p2_0 * minus * minus - (zeta - z) * (zeta - z);
}

FeedbackPolicy::FeedbackPolicy(std::shared_ptr<const SRESolution> sre, double zeta, double x,
                               std::optional<double> target)
    : sre_(std::move(sre)), zeta_(zeta), x_(x), target_(target) {
  if (!sre_) throw std::invalid_argument("FeedbackPolicy needs a solved SRE");
  h_table_ = h_path(zeta_, sre_->model(), sre_->times());
}

FeedbackPolicy make_frontier_policy(double z, double x, std::shared_ptr<const SRESolution> sre) {
  const double zeta = zeta_hat(z, x, sre->model(), sre->p2_initial());
  return FeedbackPolicy(std::move(sre), zeta, x, z);
}

Controls feedback_from_state(const SREState& state, double gap) {
  const double plus = std::max(gap, 0.0), minus = std::max(-gap, 0.0);
  Controls c;
  c.pi = state.v1 * plus + state.v2 * minus;
  c.q = state.u1 * plus + state.u2 * minus;
  return c;
}

Controls feedback_controls(double t, int n, double wealth, const FeedbackPolicy& policy) {
  const int level = std::min(n, policy.sre().n_max());
  const SREState state = sre_at(policy.sre(), t, level);
  return feedback_from_state(state, wealth - policy.h(t));
}

double FrontierPoint::stddev() const { return std::sqrt(std::max(variance, 0.0)); }

FrontierPoint frontier_variance(double z, double x, const MarketModel& model,
                                const InitialRiccati& initial) {
  FrontierPoint pt;
  pt.z = z;
  pt.riskless_mean = riskless_mean(x, model);
  pt.zeta_hat = zeta_hat(z, x, model, initial.p2);
  const double ratio =
      initial.p2 * std::exp(-2.0 * model.rate_integral(0.0, model.horizon()));
  const double excess = std::max(z - pt.riskless_mean, 0.0);
  pt.variance = ratio / (1.0 - ratio) * excess * excess;
  pt.value = relaxed_value(pt.zeta_hat, x, z, initial.p1, initial.p2, model);
  return pt;
}

std::vector<FrontierRow> frontier_table(const std::vector<double>& z_list, double x,
                                        const MarketModel& model, const InitialRiccati& initial) {
  std::vector<FrontierRow> rows;
  rows.reserve(z_list.size());
  for (double z : z_list) {
    FrontierRow row;
    row.z = z;
    try {
      row.point = frontier_variance(z, x, model, initial);
    } catch (const InfeasibleTarget& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace mvri
