#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "mvri/errors.hpp"
#include "mvri/sre.hpp"

using namespace mvri;

namespace {

SREGrid steps(int n) {
  SREGrid g;
  g.steps = n;
  return g;
}

// -min_{v in K} (v' S v + 2 s c'v) for K = R^2_+, by enumerating the four faces.
double orthant_gain(const Eigen::Matrix2d& s, const Eigen::Vector2d& c) {
  double best = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double v = -c[i] / s(i, i);
    if (v > 0.0) best = std::min(best, -c[i] * c[i] / s(i, i));
  }
  const Eigen::Vector2d v = s.ldlt().solve(-c);
  if (v[0] >= 0.0 && v[1] >= 0.0) best = std::min(best, c.dot(v));
  return -best;
}

}  // namespace

TEST_CASE("constant coefficients recover the classical exponentials") {
  const auto model = fixtures::constants_model();
  const SRESolution sol = solve_sre(model, steps(2000));
  CHECK(sol.n_max() == 0);
  const double p1 = std::exp(0.1);
  const double p2 = std::exp(0.1 - 0.04 - 0.04 / 0.09);
  CHECK(std::abs(sol.p1_initial() / p1 - 1.0) < 1e-6);
  CHECK(std::abs(sol.p2_initial() / p2 - 1.0) < 1e-6);
  CHECK(std::log(p2) == doctest::Approx(-0.384444).epsilon(1e-6));
  for (int node = 0; node < sol.nodes(); node += 97) {
    const double tau = 1.0 - sol.times()[node];
    CHECK(sol.p1(node, 0) == doctest::Approx(std::exp(0.1 * tau)).epsilon(1e-10));
    CHECK(sol.p2(node, 0) == doctest::Approx(std::exp((0.1 - 0.04 - 0.04 / 0.09) * tau)).epsilon(1e-10));
    const auto& o = sol.optima(node, 0);
    CHECK(o.v1[0] == 0.0);
    CHECK(o.v2[0] == doctest::Approx(0.2 / 0.09));
    CHECK(o.u1 == 0.0);
    CHECK(o.u2 == doctest::Approx(0.2));
  }
}

TEST_CASE("two assets, time-varying rate, orthant constraint, two-atom claims") {
  const auto model = fixtures::two_asset_model();
  const SRESolution sol = solve_sre(model, steps(400));
  Eigen::Matrix2d sigma;
  sigma << 0.25, 0.0, 0.05, 0.2;
  const Eigen::Matrix2d s = sigma * sigma.transpose();
  const Eigen::Vector2d mu(0.1, -0.02);
  const double k1 = orthant_gain(s, mu);
  const double k2 = orthant_gain(s, -mu);
  const double lambda = 2.0, ey = 0.6 * 0.5 + 0.4 * 1.5, ey2 = 0.6 * 0.25 + 0.4 * 2.25;
  const double b = lambda * ey * 0.3;
  const double int_r = 0.5 * 0.03 + 0.5 * 0.06;
  CHECK(sol.p1_initial() == doctest::Approx(std::exp(2.0 * int_r - k1)).epsilon(1e-9));
  CHECK(sol.p2_initial() ==
        doctest::Approx(std::exp(2.0 * int_r - k2 - b * b / (lambda * ey2))).epsilon(1e-9));
  CHECK(k1 > 0.0);  // the negative drift makes the positive branch trade
}

TEST_CASE("count-modulated instance matches an independent two-level integration") {
  const auto model = fixtures::count_modulated_model();
  SREGrid g = steps(1000);
  const SRESolution sol = solve_sre(model, g);
  REQUIRE(sol.n_max() >= 1);

  // Levels >= 1 share zero drift: P1 = e^{2r tau}, P2 = e^{(2r - b^2/lambda) tau}.
  const double r = 0.05, lam = 1.0, b = 0.2, beta = b + lam, th = 0.04 / 0.09;
  auto top1 = [&](double t) { return std::exp(2 * r * (1 - t)); };
  auto top2 = [&](double t) { return std::exp((2 * r - b * b / lam) * (1 - t)); };
  for (int node = 0; node < sol.nodes(); node += 50) {
    const double t = sol.times()[node];
    CHECK(sol.p1(node, 1) == doctest::Approx(top1(t)).epsilon(1e-9));
    CHECK(sol.p2(node, sol.n_max()) == doctest::Approx(top2(t)).epsilon(1e-9));
  }

  // Level 0 (point claim y = 1, full cone) integrated backward with RK4.
  auto rhs = [&](double t, double p1, double p2, double& d1, double& d2) {
    const double q1 = top1(t), q2 = top2(t);
    const double g1 = q1 - p1, g2 = q2 - p2;
    double u1 = (lam * g1 - p1 * b) / (lam * (p1 + g1));
    double gs1;
    if (u1 <= 0.0) {
      u1 = 0.0;
      gs1 = 0.0;
    } else {
      if (u1 > 1.0) throw std::runtime_error("oracle assumes u1 < 1");
      gs1 = lam * q1 * (u1 * u1 - 2 * u1) + 2 * u1 * p1 * beta;
    }
    const double num = std::max(p2 * b - lam * g2, 0.0);
    const double gs2 = -num * num / (lam * (p2 + g2));
    d1 = -(2 * r * p1 - p1 * th + gs1) - lam * g1;
    d2 = -(2 * r * p2 - p2 * th + gs2) - lam * g2;
  };
  const int n = 20000;
  const double h = 1.0 / n;
  double p1 = 1.0, p2 = 1.0;
  for (int i = n; i > 0; --i) {
    const double t = i * h;
    double a1, a2, b1, b2, c1, c2, e1, e2;
    rhs(t, p1, p2, a1, a2);
    rhs(t - h / 2, p1 - h / 2 * a1, p2 - h / 2 * a2, b1, b2);
    rhs(t - h / 2, p1 - h / 2 * b1, p2 - h / 2 * b2, c1, c2);
    rhs(t - h, p1 - h * c1, p2 - h * c2, e1, e2);
    p1 -= h / 6 * (a1 + 2 * b1 + 2 * c1 + e1);
    p2 -= h / 6 * (a2 + 2 * b2 + 2 * c2 + e2);
  }
  CHECK(sol.p1_initial() == doctest::Approx(p1).epsilon(1e-7));
  CHECK(sol.p2_initial() == doctest::Approx(p2).epsilon(1e-7));

  // Nonzero jump components and a strictly positive positive-branch retention.
  CHECK(sol.gamma1(0, 0) > 0.0);
  bool positive_u1 = false;
  for (int node = 0; node < sol.nodes(); ++node) positive_u1 = positive_u1 || sol.optima(node, 0).u1 > 0.0;
  CHECK(positive_u1);
  CHECK(sol.gamma1(0, sol.n_max()) == 0.0);
}

TEST_CASE("truncated positive-branch solutions decrease in k to the full solution") {
  for (const auto& model : {fixtures::constants_model(), fixtures::count_modulated_model()}) {
    const SREGrid g = steps(400);
    const RiccatiTable p2 = solve_P2(model, g);
    const RiccatiTable p1 = solve_P1(model, g, p2);
    std::vector<RiccatiTable> tables;
    for (int k : {1, 2, 4, 8, 16}) tables.push_back(solve_truncated(k, model, g, p2));
    for (std::size_t i = 1; i < tables.size(); ++i)
      for (int node = 0; node < p1.nodes(); ++node)
        for (int n = 0; n < p1.levels(); ++n)
          CHECK(tables[i].p(node, n) <= tables[i - 1].p(node, n) + 1e-10);
    for (int node = 0; node < p1.nodes(); ++node)
      for (int n = 0; n < p1.levels(); ++n) CHECK(std::abs(tables.back().p(node, n) - p1.p(node, n)) < 1e-6);
  }
  // The k = 1 truncation binds on the count-modulated instance (|v1| = 2.22 there).
  const auto cm = fixtures::count_modulated_model();
  const RiccatiTable p2 = solve_P2(cm, steps(200));
  CHECK(solve_truncated(1, cm, steps(200), p2).p(0, 0) > solve_P1(cm, steps(200), p2).p(0, 0) + 1e-4);
  CHECK_THROWS(solve_truncated(0, cm, steps(200), p2));
}

TEST_CASE("bounds certificate holds at every node") {
  for (const auto& model :
       {fixtures::constants_model(), fixtures::count_modulated_model(), fixtures::two_asset_model()}) {
    const SRESolution sol = solve_sre(model, steps(300));
    const auto& c = sol.certificate();
    CHECK(c.lower > 0.0);
    for (int node = 0; node < sol.nodes(); ++node) {
      for (int n = 0; n <= sol.n_max(); ++n) {
        for (double p : {sol.p1(node, n), sol.p2(node, n)}) {
          CHECK(p >= c.lower - 1e-9);
          CHECK(p <= c.upper + 1e-9);
        }
        CHECK(sol.p1(node, n) + sol.gamma1(node, n) <= c.upper + 1e-9);
        CHECK(sol.p2(node, n) + sol.gamma2(node, n) >= c.lower - 1e-9);
      }
    }
    CHECK(sol.lemma_ratio() < 1.0 - 1e-9);
  }
}

TEST_CASE("grid refinement converges at least at second order") {
  const auto model = fixtures::count_modulated_model();
  const double ref1 = solve_sre(model, steps(3200)).p1_initial();
  const double ref2 = solve_sre(model, steps(3200)).p2_initial();
  double prev = 0.0;
  for (int n : {10, 20, 40}) {
    const SRESolution s = solve_sre(model, steps(n));
    const double err = std::abs(s.p1_initial() - ref1) + std::abs(s.p2_initial() - ref2);
    if (prev > 0.0) CHECK(prev / err > 3.5);
    prev = err;
  }
}

TEST_CASE("degenerate grids and out-of-range queries") {
  const auto model = fixtures::constants_model();
  CHECK_THROWS_AS(solve_sre(model, steps(1)), SolverError);
  const SRESolution sol = solve_sre(model, steps(100));
  CHECK_THROWS_AS(sre_at(sol, 1.5, 0), std::out_of_range);
  CHECK_THROWS_AS(sre_at(sol, 0.5, 1), std::out_of_range);
  const SREState mid = sre_at(sol, 0.5, 0);
  CHECK(mid.p1 == doctest::Approx(std::exp(0.05)).epsilon(1e-12));
  CHECK(mid.u2 == doctest::Approx(0.2));
}

TEST_CASE("claim-count truncation level") {
  SREGrid g;
  CHECK(resolve_n_max(fixtures::constants_model(), g) == 0);
  const auto cm = fixtures::count_modulated_model();
  const int n = resolve_n_max(cm, g);
  // P(N_1 > n) < 1e-8 for Poisson(1), and not for n - 1.
  auto tail = [](int k) {
    double term = std::exp(-1.0), cdf = term;
    for (int i = 1; i <= k; ++i) cdf += term /= i;
    return 1.0 - cdf;
  };
  CHECK(tail(n) < 1e-8);
  CHECK(tail(n - 1) >= 1e-8);
  g.n_max = 3;
  CHECK(resolve_n_max(cm, g) == 3);
}

TEST_CASE("sre.csv layout") {
  const SRESolution sol = solve_sre(fixtures::two_asset_model(), steps(10));
  std::ostringstream os;
  write_sre_csv(sol, os);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  CHECK(header == "t,n,P1,P2,Gamma1,Gamma2,v1_hat_1,v1_hat_2,v2_hat_1,v2_hat_2,u1_hat,u2_hat");
  int rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  CHECK(rows == 11);
}
