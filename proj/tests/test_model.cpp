#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "mvri/errors.hpp"

using namespace mvri;
using fixtures::vec;

TEST_CASE("piecewise-constant and piecewise-linear tables") {
  ScalarTable pc({0.0, 0.5}, {1.0, 3.0}, Interp::PiecewiseConstant);
  CHECK(pc(0.25) == 1.0);
  CHECK(pc(0.5) == 3.0);
  CHECK(pc(7.0) == 3.0);
  CHECK(integrate(pc, 0.0, 1.0) == doctest::Approx(2.0));
  CHECK(integrate(pc, 0.25, 0.75) == doctest::Approx(1.0));

  ScalarTable pl({0.0, 1.0}, {-1.0, 1.0}, Interp::PiecewiseLinear);
  CHECK(pl(0.25) == doctest::Approx(-0.5));
  CHECK(integrate(pl, 0.0, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
  // |2t - 1| on [0, 1] integrates to 1/2
  CHECK(integrate_abs(pl, 0.0, 1.0) == doctest::Approx(0.5));
  CHECK(integrate_abs(pl, 0.0, 0.25) == doctest::Approx(0.1875));
}

TEST_CASE("table construction errors") {
  CHECK_THROWS_AS(ScalarTable({0.0, 0.0}, {1.0, 2.0}, Interp::PiecewiseConstant), ModelError);
  CHECK_THROWS_AS(ScalarTable({0.0}, {1.0, 2.0}, Interp::PiecewiseConstant), ModelError);
}

TEST_CASE("claim laws and moments") {
  const auto point = ClaimDistribution::point_mass(2.0);
  CHECK(claim_moments(point).mean == 2.0);
  CHECK(claim_moments(point).second_moment == 4.0);

  const auto atoms = ClaimDistribution::from_atoms({{0.5, 0.25}, {1.0, 0.75}});
  CHECK(claim_moments(atoms).mean == doctest::Approx(0.875));
  CHECK(claim_moments(atoms).second_moment == doctest::Approx(0.8125));
  CHECK(atoms.sample(0.1) == 0.5);
  CHECK(atoms.sample(0.9) == 1.0);
  CHECK_THROWS_AS(ClaimDistribution::from_atoms({{1.0, 0.5}}), ModelError);
  CHECK_THROWS_AS(claim_moments(ClaimDistribution::point_mass(0.0)), ModelError);

  // Uniform on [0, 2]: mean 1, second moment 4/3.
  const auto uni = ClaimDistribution::from_density([](double) { return 1.0; }, 2.0);
  CHECK(claim_moments(uni).mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(claim_moments(uni).second_moment == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(uni.y_max() == 2.0);
}

TEST_CASE("truncated exponential density quadrature converges") {
  // pdf ~ exp(-y) on [0, 3]: mean = (1 - 4 e^-3) / (1 - e^-3)
  const double e3 = std::exp(-3.0);
  const double exact = (1.0 - 4.0 * e3) / (1.0 - e3);
  auto pdf = [](double y) { return std::exp(-y); };
  double prev = 1.0;
  for (int nodes : {2, 4, 8, 16}) {
    const double err =
        std::abs(claim_moments(ClaimDistribution::from_density(pdf, 3.0, nodes)).mean - exact);
    CHECK(err <= prev);
    prev = err;
  }
  CHECK(prev < 1e-12);
}

TEST_CASE("derived premium parameters") {
  const auto m = fixtures::constants_model(ConvexCone::nonnegative(1), 0.05, 0.1, 0.3);
  const auto d = derived_params(m);
  CHECK(d.b == doctest::Approx(0.3));
  CHECK(d.a == doctest::Approx(-0.2));
  CHECK(d.p == doctest::Approx(1.1));
}

TEST_CASE("validate_model reports loading order and ellipticity") {
  CHECK(validate_model(fixtures::constants_model()).ok);

  const auto bad = fixtures::constants_model(ConvexCone::nonnegative(1), 0.05, 0.3, 0.2);
  const auto diag = validate_model(bad);
  CHECK_FALSE(diag.ok);
  REQUIRE(!diag.violations.empty());
  CHECK(diag.violations.front().find("loading order violated") != std::string::npos);

  MarketModel flat(1.0, ScalarTable(0.0), {VectorTable(vec({0.1}))},
                   {MatrixTable(Eigen::MatrixXd::Zero(1, 1))}, ConvexCone::full(1),
                   InsuranceTerms{}, ClaimDistribution::point_mass(1.0),
                   CoefficientMode::Deterministic);
  const auto d2 = validate_model(flat);
  CHECK_FALSE(d2.ok);
  bool found = false;
  for (const auto& v : d2.violations) found = found || v.find("ellipticity violated") != std::string::npos;
  CHECK(found);
}

TEST_CASE("model shape checks") {
  CHECK_THROWS_AS(MarketModel(1.0, ScalarTable(0.0),
                              {VectorTable(vec({0.1})), VectorTable(vec({0.1}))},
                              {MatrixTable(fixtures::mat1(0.2)), MatrixTable(fixtures::mat1(0.2))},
                              ConvexCone::full(1), InsuranceTerms{},
                              ClaimDistribution::point_mass(1.0), CoefficientMode::Deterministic),
                  ModelError);
  CHECK_THROWS_AS(MarketModel(1.0, ScalarTable(0.0), {VectorTable(vec({0.1}))},
                              {MatrixTable(fixtures::mat1(0.2))}, ConvexCone::full(2),
                              InsuranceTerms{}, ClaimDistribution::point_mass(1.0),
                              CoefficientMode::Deterministic),
                  ModelError);
  const auto cm = fixtures::count_modulated_model();
  CHECK(cm.mu(0.3, 0)[0] == 0.2);
  CHECK(cm.mu(0.3, 5)[0] == 0.0);
}
