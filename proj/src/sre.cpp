#include "mvri/sre.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>

#include "mvri/errors.hpp"
#include "mvri/numerics.hpp"

namespace mvri {

namespace {

constexpr double kBoundsSlack = 1e-9;

std::vector<double> uniform_times(double horizon, int steps) {
  std::vector<double> t(steps + 1);
  for (int j = 0; j <= steps; ++j) t[j] = horizon * j / steps;
  t.back() = horizon;
  return t;
}

std::vector<double> solver_times(const MarketModel& model, const SREGrid& grid) {
  if (grid.steps < 2) {
    throw SolverError("degenerate time grid: need at least 2 steps (got " +
                      std::to_string(grid.steps) + ")");
  }
  return uniform_times(model.horizon(), grid.steps);
}

// `tc` is where coefficients are sampled: always inside the current step, so
// a jump in r, mu or sigma at a node is seen from the correct side.
using Rhs =
    std::function<void(double t, double tc, const Eigen::VectorXd& u, Eigen::VectorXd& du)>;

// Classical RK4 on U = ln P, backward from U(T) = 0.
RiccatiTable integrate_backward(std::vector<double> times, int levels, const Rhs& rhs,
                                const char* name) {
  RiccatiTable table(times, levels);
  const int last = static_cast<int>(times.size()) - 1;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(levels);
  Eigen::VectorXd k1(levels), k2(levels), k3(levels), k4(levels);
  rhs(times[last], times[last], u, k1);
  for (int n = 0; n < levels; ++n) table.set(last, n, u[n], k1[n]);
  for (int j = last; j > 0; --j) {
    const double t = times[j];
    const double h = times[j - 1] - t;
    const double inside = t + 1e-9 * h;
    rhs(t, inside, u, k1);
    rhs(t + 0.5 * h, t + 0.5 * h, u + 0.5 * h * k1, k2);
    rhs(t + 0.5 * h, t + 0.5 * h, u + 0.5 * h * k2, k3);
    rhs(t + h, t + h, u + h * k3, k4);
    u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!u.allFinite()) {
      std::ostringstream os;
      os << name << " integration produced a non-finite value at t=" << times[j - 1];
      throw SolverError(os.str());
    }
    rhs(times[j - 1], times[j - 1], u, k1);
    for (int n = 0; n < levels; ++n) table.set(j - 1, n, u[n], k1[n]);
  }
  return table;
}

void check_bounds(const RiccatiTable& table, const BoundsCertificate& cert, const char* name) {
  for (int node = 0; node < table.nodes(); ++node) {
    for (int n = 0; n < table.levels(); ++n) {
      const double p = table.p(node, n);
      const double p_jump = p + table.gamma(node, n);
      for (double v : {p, p_jump}) {
        if (v < cert.lower - kBoundsSlack || v > cert.upper + kBoundsSlack) {
          std::ostringstream os;
          os << "bounds certificate violated for " << name << " at t=" << table.times()[node]
             << ", n=" << n << ": value " << v << " outside [" << cert.lower << ", "
             << cert.upper << "]";
          throw SolverError(os.str());
        }
      }
    }
  }
}

RiccatiTable solve_positive(double radius, const MarketModel& model, const SREGrid& grid,
                            const RiccatiTable& p2) {
  const auto times = solver_times(model, grid);
  const int levels = resolve_n_max(model, grid) + 1;
  if (p2.levels() != levels || p2.times() != times) {
    throw SolverError("P1 solve needs P2 on the same grid and levels");
  }
  OptimizerInputs in = make_inputs(model);
  in.gamma1.assign(1, 0.0);
  in.gamma2.assign(1, 0.0);
  const ConvexCone& cone = model.cone();
  const double lambda = in.intensity;

  Rhs rhs = [&](double t, double tc, const Eigen::VectorXd& u, Eigen::VectorXd& du) {
    const double r = model.r(tc);
    double p2_next = std::exp(p2.log_p_hermite(t, levels - 1));
    for (int n = levels - 1; n >= 0; --n) {
      const double p1 = std::exp(u[n]);
      const double gamma1 = n + 1 < levels ? std::exp(u[n + 1]) - p1 : 0.0;
      const double p2_here = n + 1 < levels ? std::exp(p2.log_p_hermite(t, n)) : p2_next;
      const double gamma2 = n + 1 < levels ? p2_next - p2_here : 0.0;
      p2_next = p2_here;

      in.p1 = p1;
      in.gamma1[0] = gamma1;
      in.p2 = p2_here;
      in.gamma2[0] = gamma2;
      in.mu = model.mu(tc, n);
      in.sigma = model.sigma(tc, n);
      const double f = F_star(Branch::Positive, in, cone, radius).value;
      const double g = G1_star(in, radius).value;
      du[n] = -(2.0 * r + (f + g) / p1) - lambda * gamma1 / p1;
    }
  };
  return integrate_backward(times, levels, rhs, "P1");
}

}  // namespace

// ---------------------------------------------------------------------------

RiccatiTable::RiccatiTable(std::vector<double> times, int levels)
    : times_(std::move(times)),
      levels_(levels),
      log_p_(times_.size() * levels, 0.0),
      log_rate_(times_.size() * levels, 0.0) {}

double RiccatiTable::p(int node, int n) const { return std::exp(log_p(node, n)); }

double RiccatiTable::gamma(int node, int n) const {
  if (n + 1 >= levels_) return 0.0;
  return p(node, n + 1) - p(node, n);
}

void RiccatiTable::set(int node, int n, double log_p, double log_rate) {
  log_p_[index(node, n)] = log_p;
  log_rate_[index(node, n)] = log_rate;
}

std::size_t RiccatiTable::locate(double t) const {
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  std::size_t hi = static_cast<std::size_t>(it - times_.begin());
  hi = std::clamp<std::size_t>(hi, 1, times_.size() - 1);
  return hi - 1;
}

double RiccatiTable::log_p_hermite(double t, int n) const {
  const std::size_t j = locate(t);
  const double t0 = times_[j], t1 = times_[j + 1];
  const double h = t1 - t0;
  const double s = (t - t0) / h;
  const double y0 = log_p(static_cast<int>(j), n), y1 = log_p(static_cast<int>(j + 1), n);
  const double d0 = log_rate(static_cast<int>(j), n) * h;
  const double d1 = log_rate(static_cast<int>(j + 1), n) * h;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * d0 + (-2 * s3 + 3 * s2) * y1 +
         (s3 - s2) * d1;
}

double RiccatiTable::log_p_linear(double t, int n) const {
  const std::size_t j = locate(t);
  const double t0 = times_[j], t1 = times_[j + 1];
  const double w = (t - t0) / (t1 - t0);
  if (w == 0.0) return log_p(static_cast<int>(j), n);
  if (w == 1.0) return log_p(static_cast<int>(j + 1), n);
  return (1.0 - w) * log_p(static_cast<int>(j), n) + w * log_p(static_cast<int>(j + 1), n);
}

// ---------------------------------------------------------------------------

BoundsCertificate bounds_certificate(const MarketModel& model, const std::vector<double>& times) {
  const auto params = derived_params(model);
  const double lambda = model.insurance().intensity;
  const double reins_rate = params.b * params.b / (lambda * model.moments().second_moment);
  const double jump_rate = std::max(lambda, reins_rate);
  std::vector<double> sample = times;
  for (double k : model.knot_times()) sample.push_back(k);
  double c1 = 0.0;
  for (double t : sample) {
    for (int n = 0; n < model.coefficient_levels(); ++n) {
      const Eigen::VectorXd mu = model.mu(t, n);
      const Eigen::MatrixXd sigma = model.sigma(t, n);
      const Eigen::MatrixXd cov = sigma * sigma.transpose();
      const double sharpe2 = mu.dot(cov.ldlt().solve(mu));
      c1 = std::max(c1, jump_rate + sharpe2 - 2.0 * model.r(t));
    }
  }
  BoundsCertificate cert;
  cert.c1 = c1;
  cert.lower = std::exp(-c1 * model.horizon());
  cert.upper = std::exp(2.0 * integrate_abs(model.rate_table(), 0.0, model.horizon()));
  return cert;
}

int resolve_n_max(const MarketModel& model, const SREGrid& grid) {
  if (model.mode() == CoefficientMode::Deterministic) return 0;
  if (grid.n_max) {
    if (*grid.n_max < 0) throw SolverError("n_max must be >= 0");
    return *grid.n_max;
  }
  const double mean = model.insurance().intensity * model.horizon();
  double pmf = std::exp(-mean);
  double cdf = pmf;
  int n = 0;
  while (1.0 - cdf >= grid.tail_probability && n < 100000) {
    ++n;
    pmf *= mean / n;
    cdf += pmf;
  }
  return std::max(n, model.coefficient_levels() - 1);
}

RiccatiTable solve_P2(const MarketModel& model, const SREGrid& grid) {
  const auto times = solver_times(model, grid);
  const int levels = resolve_n_max(model, grid) + 1;
  OptimizerInputs in = make_inputs(model);
  in.gamma2.assign(1, 0.0);
  const ConvexCone& cone = model.cone();
  const double lambda = in.intensity;

  Rhs rhs = [&](double, double tc, const Eigen::VectorXd& u, Eigen::VectorXd& du) {
    const double r = model.r(tc);
    for (int n = 0; n < levels; ++n) {
      const double p = std::exp(u[n]);
      const double gamma = n + 1 < levels ? std::exp(u[n + 1]) - p : 0.0;
      in.p2 = p;
      in.p1 = p;
      in.gamma2[0] = gamma;
      in.mu = model.mu(tc, n);
      in.sigma = model.sigma(tc, n);
      const double f = F_star(Branch::Negative, in, cone).value;
      const double g = G2_star(in).value;
      du[n] = -(2.0 * r + (f + g) / p) - lambda * gamma / p;
    }
  };
  RiccatiTable table = integrate_backward(times, levels, rhs, "P2");
  check_bounds(table, bounds_certificate(model, times), "P2");
  return table;
}

RiccatiTable solve_P1(const MarketModel& model, const SREGrid& grid, const RiccatiTable& p2) {
  RiccatiTable table = solve_positive(kUnbounded, model, grid, p2);
  check_bounds(table, bounds_certificate(model, table.times()), "P1");
  return table;
}

RiccatiTable solve_truncated(int k, const MarketModel& model, const SREGrid& grid,
                             const RiccatiTable& p2) {
  if (k < 1) throw SolverError("truncation level k must be >= 1");
  RiccatiTable table = solve_positive(static_cast<double>(k), model, grid, p2);
  check_bounds(table, bounds_certificate(model, table.times()), "P1^k");
  return table;
}

// ---------------------------------------------------------------------------

SREState optimize_at(const MarketModel& model, double t, int n, double p1, double gamma1,
                     double p2, double gamma2) {
  OptimizerInputs in = make_inputs(model);
  in.p1 = p1;
  in.p2 = p2;
  in.gamma1.assign(1, gamma1);
  in.gamma2.assign(1, gamma2);
  in.mu = model.mu(t, n);
  in.sigma = model.sigma(t, n);
  SREState s;
  s.p1 = p1;
  s.p2 = p2;
  s.gamma1 = gamma1;
  s.gamma2 = gamma2;
  s.v1 = F_star(Branch::Positive, in, model.cone()).argmin;
  s.v2 = F_star(Branch::Negative, in, model.cone()).argmin;
  s.u1 = G1_star(in).argmin;
  s.u2 = G2_star(in).argmin;
  return s;
}

SRESolution::SRESolution(MarketModel model, RiccatiTable p1, RiccatiTable p2,
                         BoundsCertificate cert)
    : model_(std::move(model)), p1_(std::move(p1)), p2_(std::move(p2)), cert_(cert) {
  if (p1_.times() != p2_.times() || p1_.levels() != p2_.levels()) {
    throw SolverError("P1 and P2 tables must share grid and levels");
  }
  optima_.resize(static_cast<std::size_t>(p1_.nodes()) * p1_.levels());
  OptimizerInputs in = make_inputs(model_);
  in.gamma1.assign(1, 0.0);
  in.gamma2.assign(1, 0.0);
  for (int node = 0; node < p1_.nodes(); ++node) {
    const double t = p1_.times()[node];
    for (int n = 0; n < p1_.levels(); ++n) {
      in.p1 = p1_.p(node, n);
      in.p2 = p2_.p(node, n);
      in.gamma1[0] = p1_.gamma(node, n);
      in.gamma2[0] = p2_.gamma(node, n);
      in.mu = model_.mu(t, n);
      in.sigma = model_.sigma(t, n);
      NodeOptima& o = optima_[static_cast<std::size_t>(node) * p1_.levels() + n];
      const auto f1 = F_star(Branch::Positive, in, model_.cone());
      const auto f2 = F_star(Branch::Negative, in, model_.cone());
      const auto g1 = G1_star(in);
      const auto g2 = G2_star(in);
      o.v1 = f1.argmin;
      o.v2 = f2.argmin;
      o.f1 = f1.value;
      o.f2 = f2.value;
      o.u1 = g1.argmin;
      o.g1 = g1.value;
      o.u2 = g2.argmin;
      o.g2 = g2.value;
    }
  }
}

double SRESolution::lemma_ratio() const {
  return p2_initial() * std::exp(-2.0 * model_.rate_integral(0.0, model_.horizon()));
}

SRESolution solve_sre(const MarketModel& model, const SREGrid& grid) {
  RiccatiTable p2 = solve_P2(model, grid);
  RiccatiTable p1 = solve_P1(model, grid, p2);
  BoundsCertificate cert = bounds_certificate(model, p1.times());
  return SRESolution(model, std::move(p1), std::move(p2), cert);
}

SREState sre_at(const SRESolution& solution, double t, int n) {
  const double horizon = solution.model().horizon();
  if (!(t >= 0.0 && t <= horizon)) {
    std::ostringstream os;
    os << "sre_at: t=" << t << " outside [0, " << horizon << "]";
    throw std::out_of_range(os.str());
  }
  if (n < 0 || n > solution.n_max()) {
    throw std::out_of_range("sre_at: level n=" + std::to_string(n) + " outside [0, " +
                            std::to_string(solution.n_max()) + "]");
  }
  const auto& t1 = solution.table1();
  const auto& t2 = solution.table2();
  const double p1 = std::exp(t1.log_p_linear(t, n));
  const double p2 = std::exp(t2.log_p_linear(t, n));
  double g1 = 0.0, g2 = 0.0;
  if (n < solution.n_max()) {
    g1 = std::exp(t1.log_p_linear(t, n + 1)) - p1;
    g2 = std::exp(t2.log_p_linear(t, n + 1)) - p2;
  }
  return optimize_at(solution.model(), t, n, p1, g1, p2, g2);
}

void write_sre_csv(const SRESolution& solution, std::ostream& os) {
  const int m = solution.model().assets();
  os << "t,n,P1,P2,Gamma1,Gamma2";
  for (int i = 1; i <= m; ++i) os << ",v1_hat_" << i;
  for (int i = 1; i <= m; ++i) os << ",v2_hat_" << i;
  os << ",u1_hat,u2_hat\n";
  for (int node = 0; node < solution.nodes(); ++node) {
    for (int n = 0; n <= solution.n_max(); ++n) {
      const auto& o = solution.optima(node, n);
      os << format_double(solution.times()[node]) << ',' << n << ','
         << format_double(solution.p1(node, n)) << ',' << format_double(solution.p2(node, n))
         << ',' << format_double(solution.gamma1(node, n)) << ','
         << format_double(solution.gamma2(node, n));
      for (int i = 0; i < m; ++i) os << ',' << format_double(o.v1[i]);
      for (int i = 0; i < m; ++i) os << ',' << format_double(o.v2[i]);
      os << ',' << format_double(o.u1) << ',' << format_double(o.u2) << '\n';
    }
  }
}

}  // namespace mvri
