#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mvri/errors.hpp"
#include "mvri/optimizers.hpp"

using namespace mvri;

namespace {

struct Draw {
  OptimizerInputs in;
  std::vector<ClaimAtom> atoms;
};

// Random inputs with P > 0 and P + Gamma > 0 at every atom.
void fill_inputs(Draw& d, std::mt19937_64& gen, int m, bool with_gamma) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int k = 1 + static_cast<int>(u(gen) * 4);
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    d.atoms.push_back({0.1 + 2.9 * u(gen), 0.05 + u(gen)});
    total += d.atoms.back().weight;
  }
  double mean = 0.0;
  for (auto& a : d.atoms) {
    a.weight /= total;
    mean += a.weight * a.size;
  }
  auto& in = d.in;
  in.p1 = 0.1 + 2.9 * u(gen);
  in.p2 = 0.1 + 2.9 * u(gen);
  if (with_gamma) {
    for (int i = 0; i < k; ++i) {
      in.gamma1.push_back(-0.9 * in.p1 + (0.9 * in.p1 + 2.0) * u(gen));
      in.gamma2.push_back(-0.9 * in.p2 + (0.9 * in.p2 + 2.0) * u(gen));
    }
  }
  in.mu = Eigen::VectorXd(m);
  for (int i = 0; i < m; ++i) in.mu[i] = -0.3 + 0.6 * u(gen);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    s(i, i) = 0.1 + 0.4 * u(gen);
    for (int j = 0; j < i; ++j) s(i, j) = -0.1 + 0.2 * u(gen);
  }
  in.sigma = s;
  in.intensity = 0.2 + 2.8 * u(gen);
  in.b = 0.01 + u(gen);
  in.b_y = mean;
  in.atoms = d.atoms;
}

double gamma_at(const std::vector<double>& g, std::size_t i) {
  return g.empty() ? 0.0 : (g.size() == 1 ? g[0] : g[i]);
}

// The negative-branch claim map in its second written form.
double g2_another(double u, const OptimizerInputs& in) {
  double quad = 0.0, lin = 0.0;
  for (std::size_t i = 0; i < in.atoms.size(); ++i) {
    const double w = (in.p2 + gamma_at(in.gamma2, i)) * in.intensity * in.atoms[i].weight;
    quad += w * in.atoms[i].size * in.atoms[i].size;
    lin += w * in.atoms[i].size;
  }
  return u * u * quad + 2.0 * u * (lin - in.p2 * (in.b + in.intensity * in.b_y));
}

double g1_direct(double u, const OptimizerInputs& in) {
  double acc = 0.0;
  for (std::size_t i = 0; i < in.atoms.size(); ++i) {
    const double y = in.atoms[i].size, w = in.atoms[i].weight;
    const double plus = std::max(1.0 - u * y, 0.0), minus = std::max(u * y - 1.0, 0.0);
    acc += in.intensity * w *
           ((in.p1 + gamma_at(in.gamma1, i)) * (plus * plus - 1.0) +
            (in.p2 + gamma_at(in.gamma2, i)) * minus * minus);
  }
  return acc + 2.0 * u * in.p1 * (in.b + in.intensity * in.b_y);
}

struct GridMin {
  double value, argmin;
};

// Dense grid on [0, hi] followed by golden-section refinement of the best cell.
template <typename F>
GridMin grid_minimize(F f, double hi, int points) {
  double best = f(0.0), arg = 0.0;
  const double h = hi / points;
  for (int i = 1; i <= points; ++i) {
    const double v = f(i * h);
    if (v < best) best = v, arg = i * h;
  }
  double a = std::max(0.0, arg - h), b = std::min(hi, arg + h);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200; ++it) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    if (f(c) < f(d)) b = d;
    else a = c;
  }
  const double mid = 0.5 * (a + b);
  if (f(mid) < best) best = f(mid), arg = mid;
  return {best, arg};
}

// Exact minimum of v'Av + 2c'v over a product cone by enumerating active faces.
double product_cone_oracle(const Eigen::MatrixXd& a, const Eigen::VectorXd& c,
                           const std::vector<int>& signs, Eigen::VectorXd& arg) {
  const int m = static_cast<int>(c.size());
  double best = 0.0;
  arg = Eigen::VectorXd::Zero(m);
  for (int mask = 0; mask < (1 << m); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < m; ++i)
      if (mask & (1 << i)) idx.push_back(i);
    const int k = static_cast<int>(idx.size());
    if (k == 0) continue;
    Eigen::MatrixXd sub(k, k);
    Eigen::VectorXd rhs(k);
    for (int r = 0; r < k; ++r) {
      rhs[r] = -c[idx[r]];
      for (int s = 0; s < k; ++s) sub(r, s) = a(idx[r], idx[s]);
    }
    const Eigen::VectorXd sol = sub.fullPivLu().solve(rhs);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
    bool ok = true;
    for (int r = 0; r < k; ++r) {
      v[idx[r]] = sol[r];
      const int s = signs[idx[r]];
      if ((s > 0 && sol[r] < 0.0) || (s < 0 && sol[r] > 0.0)) ok = false;
    }
    if (!ok) continue;
    const double val = v.dot(a * v) + 2.0 * c.dot(v);
    if (val < best) best = val, arg = v;
  }
  return best;
}

}  // namespace

TEST_CASE("F_star on a product cone matches face enumeration") {
  std::mt19937_64 gen(101);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 1 + trial % 4;
    Draw d;
    fill_inputs(d, gen, m, false);
    std::vector<int> signs(m);
    for (int i = 0; i < m; ++i) signs[i] = static_cast<int>(gen() % 3) - 1;
    const auto cone = ConvexCone::half_lines(signs);
    for (Branch br : {Branch::Positive, Branch::Negative}) {
      const double p = br == Branch::Positive ? d.in.p1 : d.in.p2;
      const Eigen::MatrixXd a = p * d.in.sigma * d.in.sigma.transpose();
      const Eigen::VectorXd c = (br == Branch::Positive ? 1.0 : -1.0) * p * d.in.mu;
      Eigen::VectorXd arg;
      const double oracle = product_cone_oracle(a, c, signs, arg);
      const ConeMinimum got = F_star(br, d.in, cone);
      CHECK(got.value == doctest::Approx(oracle).epsilon(1e-9).scale(1.0));
      CHECK((got.argmin - arg).norm() < 1e-6);
      CHECK(cone.contains(got.argmin));
      CHECK(eval_F(br, got.argmin, d.in) == doctest::Approx(got.value).epsilon(1e-12));
    }
  }
}

TEST_CASE("F_star on a generated cone matches coordinate descent over generator weights") {
  std::mt19937_64 gen(7);
  Eigen::MatrixXd g(2, 3);
  g << 1.0, 0.0, 1.0,
       0.0, 1.0, -0.5;
  const auto cone = ConvexCone::generated(g);
  for (int trial = 0; trial < 50; ++trial) {
    Draw d;
    fill_inputs(d, gen, 2, false);
    const Eigen::MatrixXd a = d.in.p2 * d.in.sigma * d.in.sigma.transpose();
    const Eigen::VectorXd c = -d.in.p2 * d.in.mu;
    // minimize over w >= 0 of (Gw)'A(Gw) + 2c'Gw
    const Eigen::MatrixXd q = g.transpose() * a * g;
    const Eigen::VectorXd l = g.transpose() * c;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
    for (int sweep = 0; sweep < 20000; ++sweep) {
      for (int i = 0; i < 3; ++i) {
        const double rest = q.row(i).dot(w) - q(i, i) * w[i] + l[i];
        w[i] = std::max(0.0, -rest / q(i, i));
      }
    }
    const Eigen::VectorXd v = g * w;
    const double oracle = v.dot(a * v) + 2.0 * c.dot(v);
    const ConeMinimum got = F_star(Branch::Negative, d.in, cone);
    CHECK(got.value == doctest::Approx(oracle).epsilon(1e-8).scale(1.0));
    CHECK(cone.contains(got.argmin, 1e-8));
  }
}

TEST_CASE("F_star with a radius matches a bounded grid search") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 50; ++trial) {
    Draw d;
    fill_inputs(d, gen, 1, false);
    const double radius = 0.05 + 0.5 * (trial % 5);
    const auto cone = ConvexCone::full(1);
    const double p = d.in.p1, s2 = d.in.sigma(0, 0) * d.in.sigma(0, 0);
    auto f = [&](double v) { return p * s2 * v * v + 2.0 * v * p * d.in.mu[0]; };
    double best = 0.0;
    for (int i = -20000; i <= 20000; ++i) best = std::min(best, f(radius * i / 20000.0));
    const ConeMinimum got = F_star(Branch::Positive, d.in, cone, radius);
    CHECK(std::abs(got.argmin[0]) <= radius + 1e-12);
    CHECK(got.value <= best + 1e-12);
    CHECK(got.value >= best - 1e-6);
  }
}

TEST_CASE("G2_star equals the brute-force minimum of the quadratic form") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 100; ++trial) {
    Draw d;
    fill_inputs(d, gen, 1, true);
    const ScalarMinimum got = G2_star(d.in);
    const double hi = 2.0 * got.argmin + 1.0;
    const GridMin oracle = grid_minimize([&](double u) { return g2_another(u, d.in); }, hi, 100000);
    CHECK(std::abs(got.value - oracle.value) < 1e-6);
    CHECK(std::abs(got.argmin - oracle.argmin) < 1e-4);
    CHECK(eval_G2(got.argmin, d.in) == doctest::Approx(got.value).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("G1_star equals the brute-force minimum of the piecewise map") {
  std::mt19937_64 gen(77);
  int interior = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Draw d;
    fill_inputs(d, gen, 1, true);
    const ScalarMinimum got = G1_star(d.in);
    const double hi = 2.0 * got.argmin + 4.0;
    const GridMin oracle = grid_minimize([&](double u) { return g1_direct(u, d.in); }, hi, 100000);
    CHECK(std::abs(got.value - oracle.value) < 1e-9);
    CHECK(std::abs(got.argmin - oracle.argmin) < 1e-4);
    CHECK(got.value <= 0.0);
    CHECK(eval_G1(got.argmin, d.in) == doctest::Approx(got.value).epsilon(1e-10).scale(1.0));
    interior += got.argmin > 0.0;
  }
  CHECK(interior > 10);  // the draws exercise the nontrivial branch
}

TEST_CASE("G1_star with a cap") {
  std::mt19937_64 gen(78);
  for (int trial = 0; trial < 50; ++trial) {
    Draw d;
    fill_inputs(d, gen, 1, true);
    const ScalarMinimum free = G1_star(d.in);
    const double cap = 0.5 * free.argmin;
    const ScalarMinimum capped = G1_star(d.in, cap);
    CHECK(capped.argmin <= cap);
    CHECK(capped.value >= free.value - 1e-15);
  }
}

TEST_CASE("zero jump components give zero positive-branch retention") {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 100; ++trial) {
    Draw d;
    fill_inputs(d, gen, 1 + trial % 3, false);
    const ScalarMinimum g = G1_star(d.in);
    CHECK(g.argmin == 0.0);
    CHECK(g.value == 0.0);
  }
}

TEST_CASE("positivity checks and degenerate claims") {
  std::mt19937_64 gen(1);
  Draw d;
    fill_inputs(d, gen, 1, false);
  check_positivity(d.in);
  d.in.p2 = -1.0;
  CHECK_THROWS_AS(check_positivity(d.in), ModelError);
  std::vector<ClaimAtom> zero{{0.0, 1.0}};
  d.in.p2 = 1.0;
  d.in.atoms = zero;
  CHECK_THROWS_AS(G2_star(d.in), ModelError);
}
