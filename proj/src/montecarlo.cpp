#include "mvri/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mvri/errors.hpp"
#include "mvri/numerics.hpp"
#include "mvri/rng.hpp"

namespace mvri {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> base_grid(double horizon, double dt_max) {
  const int steps = std::max(1, static_cast<int>(std::ceil(horizon / dt_max - 1e-12)));
  std::vector<double> t(steps + 1);
  for (int k = 0; k <= steps; ++k) t[k] = horizon * k / steps;
  t.back() = horizon;
  return t;
}

// Read-only data shared by all paths of one run.
struct RunContext {
  RunContext(const MarketModel& m, const SimConfig& c)
      : model(m), config(c), grid(base_grid(m.horizon(), c.dt_max)) {}

  const MarketModel& model;
  const SimConfig& config;
  std::vector<double> grid;
  double beta = 0.0;  // b + lambda b_Y
  double a = 0.0;
  // Feedback only.
  const FeedbackPolicy* policy = nullptr;
  double pi_scale = 1.0, q_scale = 1.0;
  std::vector<std::vector<SREState>> states;  // [level][grid node]
  std::vector<double> h_grid;
  // Fixed only.
  Eigen::VectorXd fixed_pi;
  double fixed_q = 0.0;
  bool zero = false;
};

void check_admissible(const RunContext& ctx, const Eigen::VectorXd& pi, double q, int path,
                      double t) {
  const double scale = std::max(1.0, pi.size() ? pi.cwiseAbs().maxCoeff() : 0.0);
  if (!ctx.model.cone().contains(pi, 1e-10 * scale) || !(q >= 0.0)) {
    std::ostringstream os;
    os << "inadmissible strategy on path " << path << " at t=" << t << ": pi=("
       << pi.transpose() << ") q=" << q;
    throw InadmissibleStrategy(os.str());
  }
}

// State at (t, n) with t = grid[node] when node >= 0, otherwise off-grid.
const SREState& feedback_state(const RunContext& ctx, double t, int node, int n,
                               SREState& scratch) {
  const int level = std::min(n, ctx.policy->sre().n_max());
  if (node >= 0) return ctx.states[level][node];
  scratch = sre_at(ctx.policy->sre(), t, level);
  return scratch;
}

double feedback_h(const RunContext& ctx, double t, int node) {
  return node >= 0 ? ctx.h_grid[node] : ctx.policy->h(t);
}

Controls scaled_feedback(const RunContext& ctx, const SREState& s, double gap) {
  Controls c = feedback_from_state(s, gap);
  c.pi *= ctx.pi_scale;
  c.q *= ctx.q_scale;
  return c;
}

struct PathOutput {
  PathSummary summary;
  PathRecord record;
};

PathOutput run_path(const RunContext& ctx, int path) {
  const MarketModel& model = ctx.model;
  const double horizon = model.horizon();
  const double lambda = model.insurance().intensity;
  const int dim = model.brownian_dim();
  const bool feedback = ctx.policy != nullptr;
  const bool explicit_mode = feedback && ctx.config.mode == SimMode::ExplicitProduct;
  const bool record = ctx.config.record_paths;

  PathOutput out;
  PathRecord& rec = out.record;
  PathSummary& sum = out.summary;
  sum.max_gap = kNegInf;

  PathStream claim_rng(ctx.config.seed, static_cast<std::uint64_t>(path), StreamId::Claims);
  PathStream normal_rng(ctx.config.seed, static_cast<std::uint64_t>(path), StreamId::Brownian);

  std::vector<double> claim_t, claim_y;
  for (double t = claim_rng.exponential(lambda); t < horizon; t += claim_rng.exponential(lambda)) {
    claim_t.push_back(t);
    claim_y.push_back(model.claims().sample(claim_rng.uniform()));
  }
  sum.claims = static_cast<int>(claim_t.size());

  const std::vector<double>& grid = ctx.grid;
  double x = feedback ? ctx.policy->initial_wealth() : ctx.config.initial_wealth;
  double gap = feedback ? x - ctx.h_grid[0] : 0.0;  // D = X - h, primary state in explicit mode
  double t = 0.0;
  int node = 0;  // grid index of t, or -1 when t is a claim time off the grid
  std::size_t next_grid = 1;
  std::size_t next_claim = 0;
  int n = 0;
  SREState scratch;
  Eigen::VectorXd dw(dim);

  auto controls_at = [&](double time, int at_node, double wealth, double& h_out,
                         const SREState** st) -> Controls {
    if (feedback) {
      h_out = feedback_h(ctx, time, at_node);
      *st = &feedback_state(ctx, time, at_node, n, scratch);
      return scaled_feedback(ctx, **st, explicit_mode ? gap : wealth - h_out);
    }
    if (ctx.zero) return {Eigen::VectorXd::Zero(model.assets()), 0.0};
    return {ctx.fixed_pi, ctx.fixed_q};
  };

  while (t < horizon) {
    const double grid_next = grid[next_grid];
    const bool claim_first = next_claim < claim_t.size() && claim_t[next_claim] < grid_next;
    const double t_next = claim_first ? claim_t[next_claim] : grid_next;
    const double dt = t_next - t;

    double h = 0.0;
    const SREState* st = nullptr;
    const Controls c = controls_at(t, node, x, h, &st);
    check_admissible(ctx, c.pi, c.q, path, t);
    if (feedback) sum.max_gap = std::max(sum.max_gap, explicit_mode ? gap : x - h);
    if (c.q > 1.0) sum.q_above_one_time += dt;
    if (record) {
      rec.times.push_back(t);
      rec.wealth.push_back(x);
      rec.pi.push_back(c.pi);
      rec.q.push_back(c.q);
    }

    for (int j = 0; j < dim; ++j) dw[j] = normal_rng.normal();
    dw *= std::sqrt(dt);
    const Eigen::VectorXd mu = model.mu(t, n);
    const Eigen::MatrixXd sigma = model.sigma(t, n);
    const double growth = model.rate_integral(t, t_next);

    if (explicit_mode) {
      if (gap > 0.0) {
        const Eigen::VectorXd v = ctx.pi_scale * st->v1;
        const double u = ctx.q_scale * st->u1;
        const Eigen::VectorXd sv = sigma.transpose() * v;
        gap *= std::exp(growth + (v.dot(mu) + u * ctx.beta - 0.5 * sv.squaredNorm()) * dt +
                        sv.dot(dw));
      } else if (gap < 0.0) {
        const Eigen::VectorXd v = ctx.pi_scale * st->v2;
        const double u = ctx.q_scale * st->u2;
        const Eigen::VectorXd sv = sigma.transpose() * v;
        gap *= std::exp(growth + (-v.dot(mu) - u * ctx.beta - 0.5 * sv.squaredNorm()) * dt -
                        sv.dot(dw));
      }
    } else {
      x = std::exp(growth) * x + (c.pi.dot(mu) + ctx.beta * c.q + ctx.a) * dt +
          c.pi.dot(sigma * dw);
    }

    t = t_next;
    const bool on_grid = !claim_first;
    node = on_grid ? static_cast<int>(next_grid) : -1;
    if (on_grid) ++next_grid;
    if (explicit_mode) x = gap + feedback_h(ctx, t, node);

    if (claim_first || (next_claim < claim_t.size() && claim_t[next_claim] == t)) {
      // Predictable retention: controls at the pre-claim state.
      const double y = claim_y[next_claim];
      double h_pre = 0.0;
      const SREState* st_pre = nullptr;
      const Controls pre = controls_at(t, node, x, h_pre, &st_pre);
      check_admissible(ctx, pre.pi, pre.q, path, t);
      if (feedback) sum.max_gap = std::max(sum.max_gap, explicit_mode ? gap : x - h_pre);
      if (explicit_mode) {
        if (gap > 0.0) gap *= 1.0 - ctx.q_scale * st_pre->u1 * y;
        else if (gap < 0.0) gap *= 1.0 + ctx.q_scale * st_pre->u2 * y;
        x = gap + h_pre;
      } else {
        x -= pre.q * y;
      }
      ++next_claim;
      ++n;
    }
    if (!std::isfinite(x)) {
      throw SolverError("non-finite wealth on path " + std::to_string(path));
    }
  }

  if (feedback) {
    const double h_end = ctx.h_grid.back();
    sum.max_gap = std::max(sum.max_gap, explicit_mode ? gap : x - h_end);
  }
  sum.terminal = x;
  if (record) {
    rec.times.push_back(t);
    rec.wealth.push_back(x);
    rec.claim_times = std::move(claim_t);
    rec.claim_sizes = std::move(claim_y);
    rec.terminal = x;
  }
  return out;
}

}  // namespace

std::vector<double> SimulationResult::terminals() const {
  std::vector<double> out;
  out.reserve(summaries.size());
  for (const auto& s : summaries) out.push_back(s.terminal);
  return out;
}

SimulationResult simulate_paths(const MarketModel& model, const Strategy& strategy,
                                const SimConfig& config) {
  if (config.n_paths < 1) throw std::invalid_argument("n_paths must be >= 1");
  if (!(config.dt_max > 0.0)) throw std::invalid_argument("dt_max must be > 0");

  RunContext ctx(model, config);
  const auto params = derived_params(model);
  ctx.beta = params.b + model.insurance().intensity * model.moments().mean;
  ctx.a = params.a;

  if (std::holds_alternative<ZeroStrategy>(strategy)) {
    ctx.zero = true;
  } else if (const auto* f = std::get_if<FixedStrategy>(&strategy)) {
    if (f->pi.size() != model.assets()) throw std::invalid_argument("fixed pi has wrong size");
    ctx.fixed_pi = f->pi;
    ctx.fixed_q = f->q;
    check_admissible(ctx, f->pi, f->q, 0, 0.0);
  } else {
    const auto& fb = std::get<FeedbackStrategy>(strategy);
    if (!fb.policy) throw std::invalid_argument("feedback strategy without a policy");
    ctx.policy = fb.policy.get();
    ctx.pi_scale = fb.pi_scale;
    ctx.q_scale = fb.q_scale;
    const SRESolution& sre = fb.policy->sre();
    ctx.states.resize(sre.n_max() + 1);
    for (int level = 0; level <= sre.n_max(); ++level) {
      ctx.states[level].reserve(ctx.grid.size());
      for (double t : ctx.grid) ctx.states[level].push_back(sre_at(sre, t, level));
    }
    ctx.h_grid = h_path(fb.policy->zeta(), model, ctx.grid);
  }

  const int n_paths = config.n_paths;
  std::vector<PathOutput> outputs(n_paths);
  int threads = config.threads > 0 ? config.threads
                                   : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, std::max(1, n_paths / 64));

  std::vector<std::exception_ptr> errors(threads);
  auto worker = [&](int id) {
    try {
      const int begin = static_cast<int>(static_cast<long long>(n_paths) * id / threads);
      const int end = static_cast<int>(static_cast<long long>(n_paths) * (id + 1) / threads);
      for (int p = begin; p < end; ++p) outputs[p] = run_path(ctx, p);
    } catch (...) {
      errors[id] = std::current_exception();
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int id = 0; id < threads; ++id) pool.emplace_back(worker, id);
    for (auto& th : pool) th.join();
  }
  // Report the error from the lowest path range so failures are reproducible.
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  SimulationResult result;
  result.horizon = model.horizon();
  result.summaries.reserve(n_paths);
  for (auto& o : outputs) result.summaries.push_back(o.summary);
  if (config.record_paths) {
    result.paths.reserve(n_paths);
    for (auto& o : outputs) result.paths.push_back(std::move(o.record));
  }
  return result;
}

TerminalStats estimate_terminal_stats(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("terminal statistics need at least 2 paths");
  const double nd = static_cast<double>(n);
  const double mean = pairwise_sum(samples) / nd;
  std::vector<double> d2(n), d4(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = samples[i] - mean;
    d2[i] = d * d;
    d4[i] = d2[i] * d2[i];
  }
  const double m2 = pairwise_sum(d2) / nd;
  const double m4 = pairwise_sum(d4) / nd;
  TerminalStats s;
  s.n = n;
  s.mean = mean;
  s.variance = m2 * nd / (nd - 1.0);
  s.se_mean = std::sqrt(s.variance / nd);
  // Var(s^2) ~ (mu4 - (n-3)/(n-1) sigma^4) / n
  const double var_of_var = (m4 - (nd - 3.0) / (nd - 1.0) * s.variance * s.variance) / nd;
  s.se_var = std::sqrt(std::max(var_of_var, 0.0));
  return s;
}

TerminalStats estimate_terminal_stats(const SimulationResult& result) {
  const auto x = result.terminals();
  return estimate_terminal_stats(x);
}

double q_exceeds_one_frequency(const SimulationResult& result) {
  if (result.summaries.empty() || !(result.horizon > 0.0)) return 0.0;
  std::vector<double> w;
  w.reserve(result.summaries.size());
  for (const auto& s : result.summaries) w.push_back(s.q_above_one_time);
  return pairwise_sum(w) / (result.horizon * static_cast<double>(w.size()));
}

double q_exceeds_one_frequency(std::span<const PathRecord> records) {
  double above = 0.0, total = 0.0;
  for (const auto& r : records) {
    for (std::size_t i = 0; i + 1 < r.times.size() && i < r.q.size(); ++i) {
      const double dt = r.times[i + 1] - r.times[i];
      total += dt;
      if (r.q[i] > 1.0) above += dt;
    }
  }
  return total > 0.0 ? above / total : 0.0;
}

SecondMoment second_moment_about(const SimulationResult& result, double zeta) {
  const std::size_t n = result.summaries.size();
  if (n < 2) throw std::invalid_argument("second moment needs at least 2 paths");
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = result.summaries[i].terminal - zeta;
    sq[i] = d * d;
  }
  const TerminalStats s = estimate_terminal_stats(sq);
  return {s.mean, s.se_mean};
}

ValidationReport validate_frontier(std::shared_ptr<const SRESolution> sre, double x, double z,
                                   const SimConfig& config, const ValidationOptions& options) {
  if (config.n_paths < 2) throw std::invalid_argument("validation needs at least 2 paths");
  const MarketModel& model = sre->model();
  ValidationReport rep;
  rep.z = z;
  rep.analytic = frontier_variance(z, x, model, {sre->p1_initial(), sre->p2_initial()});
  auto policy = std::make_shared<const FeedbackPolicy>(make_frontier_policy(z, x, sre));

  rep.simulation = simulate_paths(model, FeedbackStrategy{policy}, config);
  const SimulationResult& sim = rep.simulation;
  rep.stats = estimate_terminal_stats(sim);
  const SecondMoment sm = second_moment_about(sim, rep.analytic.zeta_hat);
  rep.second_moment_about_zeta = sm.value;
  rep.second_moment_se = sm.se;
  rep.max_gap = kNegInf;
  for (const auto& s : sim.summaries) rep.max_gap = std::max(rep.max_gap, s.max_gap);

  const double floor = 1e-9 * std::max(1.0, std::abs(z));
  const double var_ref = options.variance_scale * rep.analytic.variance;

  StatCheck mean{"mean", rep.stats.mean, z, rep.stats.se_mean, 3.0 * rep.stats.se_mean + floor};
  StatCheck var{"variance", rep.stats.variance, var_ref, rep.stats.se_var,
                std::max(0.05 * var_ref, 3.0 * rep.stats.se_var) + floor};
  const double identity = sm.value - (rep.analytic.zeta_hat - z) * (rep.analytic.zeta_hat - z);
  StatCheck value{"value_identity", identity, options.variance_scale * rep.analytic.value, sm.se,
                  std::max(0.05 * std::abs(options.variance_scale * rep.analytic.value),
                           3.0 * sm.se) + floor};
  const double sign_tol = config.mode == SimMode::ExplicitProduct
                              ? 1e-12 * std::max(1.0, std::abs(rep.analytic.zeta_hat))
                              : 5.0 * std::sqrt(config.dt_max) *
                                    std::max(1.0, std::abs(rep.analytic.zeta_hat));
  StatCheck sign{"sign_invariant", rep.max_gap, 0.0, 0.0, sign_tol, false};

  for (StatCheck* c : {&mean, &var, &value}) {
    c->passed = std::abs(c->estimate - c->reference) <= c->tolerance;
  }
  sign.passed = rep.max_gap <= sign_tol;
  rep.checks = {mean, var, value, sign};
  rep.passed = std::all_of(rep.checks.begin(), rep.checks.end(),
                           [](const StatCheck& c) { return c.passed; });
  return rep;
}

ProbeResult suboptimality_probe(const std::shared_ptr<const FeedbackPolicy>& policy,
                                double pi_scale, double q_scale, const SimConfig& config) {
  const MarketModel& model = policy->model();
  ProbeResult res;
  res.pi_scale = pi_scale;
  res.q_scale = q_scale;
  const auto opt = simulate_paths(model, FeedbackStrategy{policy}, config);
  const auto pert = simulate_paths(model, FeedbackStrategy{policy, pi_scale, q_scale}, config);
  res.optimal = second_moment_about(opt, policy->zeta());
  res.perturbed = second_moment_about(pert, policy->zeta());
  res.passed = res.perturbed.value >= res.optimal.value - 3.0 * res.optimal.se;
  return res;
}

void write_simulation_csv(const SimulationResult& result, std::ostream& os) {
  os << "path,n_claims,X_T\n";
  for (std::size_t i = 0; i < result.summaries.size(); ++i) {
    const auto& s = result.summaries[i];
    os << i << ',' << s.claims << ',' << format_double(s.terminal) << '\n';
  }
}

}  // namespace mvri
