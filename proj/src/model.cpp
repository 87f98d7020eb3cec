#include "mvri/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "mvri/errors.hpp"
#include "mvri/numerics.hpp"

namespace mvri {

namespace {

template <typename Value>
void check_same_shape(const Value& a, const Value& b) {
  if constexpr (!std::is_same_v<Value, double>) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
      throw ModelError("coefficient table values must share one shape");
    }
  }
}

template <typename Value>
bool values_equal(const Value& a, const Value& b) {
  if constexpr (std::is_same_v<Value, double>) {
    return a == b;
  } else {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
  }
}

template <typename Value>
bool tables_equal(const TimeTable<Value>& a, const TimeTable<Value>& b) {
  if (a.interp() != b.interp() || a.times() != b.times() ||
      a.values().size() != b.values().size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    if (!values_equal(a.values()[i], b.values()[i])) return false;
  }
  return true;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

template <typename Value>
TimeTable<Value>::TimeTable(std::vector<double> times, std::vector<Value> values,
                            Interp interp)
    : times_(std::move(times)), values_(std::move(values)), interp_(interp) {
  if (times_.empty() || times_.size() != values_.size()) {
    throw ModelError("coefficient table needs matching, nonempty times and values");
  }
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) {
      throw ModelError("coefficient table times must be strictly increasing");
    }
    check_same_shape(values_[i], values_[0]);
  }
}

template <typename Value>
Value TimeTable<Value>::operator()(double t) const {
  if (values_.size() == 1 || t <= times_.front()) return values_.front();
  if (t >= times_.back()) return values_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
  const std::size_t lo = hi - 1;
  if (interp_ == Interp::PiecewiseConstant) return values_[lo];
  const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
  return Value((1.0 - w) * values_[lo] + w * values_[hi]);
}

template class TimeTable<double>;
template class TimeTable<Eigen::VectorXd>;
template class TimeTable<Eigen::MatrixXd>;

bool operator==(const ScalarTable& a, const ScalarTable& b) { return tables_equal(a, b); }
bool operator==(const VectorTable& a, const VectorTable& b) { return tables_equal(a, b); }
bool operator==(const MatrixTable& a, const MatrixTable& b) { return tables_equal(a, b); }

namespace {

// Integrates f(table(t)) over [t0, t1] piece by piece; `piece` receives the
// endpoints of a sub-interval on which the table is affine, with values.
template <typename Piece>
double integrate_pieces(const ScalarTable& table, double t0, double t1, Piece piece) {
  if (t1 < t0) return -integrate_pieces(table, t1, t0, piece);
  std::vector<double> cuts{t0};
  for (double k : table.times())
    if (k > t0 && k < t1) cuts.push_back(k);
  cuts.push_back(t1);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    if (b <= a) continue;
    if (table.interp() == Interp::PiecewiseConstant) {
      const double v = table(0.5 * (a + b));
      total += piece(a, b, v, v);
    } else {
      total += piece(a, b, table(a), table(b));
    }
  }
  return total;
}

}  // namespace

double integrate(const ScalarTable& table, double t0, double t1) {
  return integrate_pieces(table, t0, t1, [](double a, double b, double va, double vb) {
    return 0.5 * (va + vb) * (b - a);
  });
}

double integrate_abs(const ScalarTable& table, double t0, double t1) {
  return integrate_pieces(table, t0, t1, [](double a, double b, double va, double vb) {
    if (va * vb >= 0.0) return 0.5 * (std::abs(va) + std::abs(vb)) * (b - a);
    const double zero = a + (b - a) * va / (va - vb);
    return 0.5 * std::abs(va) * (zero - a) + 0.5 * std::abs(vb) * (b - zero);
  });
}

// ---------------------------------------------------------------------------

ClaimDistribution ClaimDistribution::point_mass(double size) {
  return from_atoms({{size, 1.0}});
}

ClaimDistribution ClaimDistribution::from_atoms(std::vector<ClaimAtom> atoms) {
  if (atoms.empty()) throw ModelError("claim distribution needs at least one atom");
  double total = 0.0;
  double y_max = 0.0;
  for (const auto& atom : atoms) {
    if (!std::isfinite(atom.size) || atom.size < 0.0) {
      throw ModelError("claim sizes must be finite and nonnegative");
    }
    if (!(atom.weight >= 0.0)) throw ModelError("claim weights must be nonnegative");
    total += atom.weight;
    y_max = std::max(y_max, atom.size);
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ModelError("claim weights must sum to 1 (got " + fmt(total) + ")");
  }
  ClaimDistribution d;
  d.kind_ = Kind::DiscreteAtoms;
  d.atoms_ = std::move(atoms);
  d.y_max_ = y_max;
  d.finalize();
  return d;
}

ClaimDistribution ClaimDistribution::from_density(
    const std::function<double(double)>& pdf, double y_max, int nodes) {
  if (!(y_max > 0.0) || !std::isfinite(y_max)) {
    throw ModelError("claim density needs a finite positive support bound");
  }
  const QuadratureRule rule = gauss_legendre(nodes, 0.0, y_max);
  std::vector<ClaimAtom> atoms;
  atoms.reserve(nodes);
  double total = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double f = pdf(rule.nodes[i]);
    if (!(f >= 0.0) || !std::isfinite(f)) throw ModelError("claim density must be finite and >= 0");
    atoms.push_back({rule.nodes[i], f * rule.weights[i]});
    total += atoms.back().weight;
  }
  if (!(total > 0.0)) throw ModelError("claim density integrates to zero");
  for (auto& atom : atoms) atom.weight /= total;
  ClaimDistribution d;
  d.kind_ = Kind::ContinuousDensity;
  d.atoms_ = std::move(atoms);
  d.y_max_ = y_max;
  d.finalize();
  return d;
}

void ClaimDistribution::finalize() {
  cdf_.resize(atoms_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    acc += atoms_[i].weight;
    cdf_[i] = acc;
  }
  cdf_.back() = 1.0;
}

double ClaimDistribution::sample(double uniform) const {
  const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), uniform);
  const std::size_t i = std::min<std::size_t>(it - cdf_.begin(), atoms_.size() - 1);
  return atoms_[i].size;
}

ClaimMoments claim_moments(const ClaimDistribution& claims) {
  double m1 = 0.0, m2 = 0.0;
  for (const auto& atom : claims.atoms()) {
    m1 += atom.weight * atom.size;
    m2 += atom.weight * atom.size * atom.size;
  }
  if (!(m1 > 0.0) || !(m2 > 0.0)) {
    throw ModelError("claim distribution is degenerate at zero (b_Y must be > 0)");
  }
  return {m1, m2};
}

// ---------------------------------------------------------------------------

MarketModel::MarketModel(double horizon, ScalarTable rate, std::vector<VectorTable> drift,
                         std::vector<MatrixTable> volatility, ConvexCone cone,
                         InsuranceTerms insurance, ClaimDistribution claims,
                         CoefficientMode mode, double ellipticity_floor)
    : horizon_(horizon),
      rate_(std::move(rate)),
      drift_(std::move(drift)),
      volatility_(std::move(volatility)),
      cone_(std::move(cone)),
      insurance_(insurance),
      claims_(std::move(claims)),
      mode_(mode),
      ellipticity_floor_(ellipticity_floor) {
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) throw ModelError("horizon must be positive");
  if (drift_.empty() || drift_.size() != volatility_.size()) {
    throw ModelError("drift and volatility need the same, nonzero number of levels");
  }
  if (mode_ == CoefficientMode::Deterministic && drift_.size() != 1) {
    throw ModelError("deterministic mode takes exactly one coefficient level");
  }
  assets_ = static_cast<int>(drift_.front().values().front().size());
  brownian_dim_ = static_cast<int>(volatility_.front().values().front().cols());
  if (assets_ < 1) throw ModelError("need at least one risky asset");
  for (std::size_t n = 0; n < drift_.size(); ++n) {
    if (drift_[n].values().front().size() != assets_) {
      throw ModelError("drift dimension differs across levels");
    }
    const auto& s = volatility_[n].values().front();
    if (s.rows() != assets_ || s.cols() != brownian_dim_) {
      throw ModelError("volatility must be m x n_W at every level");
    }
  }
  if (brownian_dim_ < assets_) throw ModelError("Brownian dimension must be >= number of assets");
  if (cone_.dim() != assets_) throw ModelError("cone dimension must match number of assets");
  if (!(ellipticity_floor_ > 0.0)) throw ModelError("ellipticity floor must be > 0");
  moments_ = claim_moments(claims_);
}

Eigen::VectorXd MarketModel::mu(double t, int n) const {
  const std::size_t level = std::min<std::size_t>(std::max(n, 0), drift_.size() - 1);
  return drift_[level](t);
}

Eigen::MatrixXd MarketModel::sigma(double t, int n) const {
  const std::size_t level = std::min<std::size_t>(std::max(n, 0), volatility_.size() - 1);
  return volatility_[level](t);
}

std::vector<double> MarketModel::knot_times() const {
  std::set<double> knots{0.0, horizon_};
  auto add = [&](const std::vector<double>& ts) {
    for (double t : ts)
      if (t > 0.0 && t < horizon_) knots.insert(t);
  };
  add(rate_.times());
  for (const auto& d : drift_) add(d.times());
  for (const auto& s : volatility_) add(s.times());
  return {knots.begin(), knots.end()};
}

DerivedParams derived_params(const MarketModel& model) {
  const auto& ins = model.insurance();
  const double lam_by = ins.intensity * model.moments().mean;
  return {lam_by * ins.reinsurance_loading, lam_by * (ins.loading - ins.reinsurance_loading),
          (1.0 + ins.loading) * lam_by};
}

ModelDiagnostics validate_model(const MarketModel& model, int time_samples) {
  ModelDiagnostics diag;
  auto fail = [&](std::string msg) {
    diag.ok = false;
    diag.violations.push_back(std::move(msg));
  };

  const auto& ins = model.insurance();
  if (!(ins.intensity > 0.0)) fail("claim intensity must be > 0 (lambda=" + fmt(ins.intensity) + ")");
  if (!(ins.loading > 0.0)) fail("safety loading must be > 0 (eta=" + fmt(ins.loading) + ")");
  if (ins.reinsurance_loading < ins.loading) {
    fail("loading order violated: eta_r=" + fmt(ins.reinsurance_loading) + " < eta=" +
         fmt(ins.loading));
  }

  const auto& claims = model.claims();
  diag.claim_support = claims.y_max();
  if (!std::isfinite(claims.y_max())) fail("claim support must be bounded");
  const auto& mom = model.moments();
  if (mom.second_moment + 1e-14 < mom.mean * mom.mean) fail("claim moments violate Jensen");

  std::set<double> sample_times(
      [&] {
        std::set<double> s;
        for (int i = 0; i < time_samples; ++i)
          s.insert(model.horizon() * i / std::max(1, time_samples - 1));
        return s;
      }());
  for (double t : model.knot_times()) sample_times.insert(t);

  diag.delta_hat = std::numeric_limits<double>::infinity();
  const int levels = model.coefficient_levels();
  for (double t : sample_times) {
    const double r = model.r(t);
    if (!std::isfinite(r)) fail("interest rate not finite at t=" + fmt(t));
    diag.rate_bound = std::max(diag.rate_bound, std::abs(r));
    for (int n = 0; n < levels; ++n) {
      const Eigen::VectorXd mu = model.mu(t, n);
      const Eigen::MatrixXd sigma = model.sigma(t, n);
      if (!mu.allFinite() || !sigma.allFinite()) {
        fail("coefficients not finite at t=" + fmt(t) + " (n=" + std::to_string(n) + ")");
        continue;
      }
      diag.drift_bound = std::max(diag.drift_bound, mu.cwiseAbs().maxCoeff());
      diag.volatility_bound = std::max(diag.volatility_bound, sigma.cwiseAbs().maxCoeff());
      const Eigen::MatrixXd cov = sigma * sigma.transpose();
      const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                                 cov, Eigen::EigenvaluesOnly)
                                 .eigenvalues()
                                 .minCoeff();
      diag.delta_hat = std::min(diag.delta_hat, min_eig);
      if (min_eig < model.ellipticity_floor()) {
        fail("ellipticity violated at t=" + fmt(t) + " (n=" + std::to_string(n) +
             "): min eigenvalue " + fmt(min_eig) + " < " + fmt(model.ellipticity_floor()));
      }
    }
  }
  return diag;
}

}  // namespace mvri
