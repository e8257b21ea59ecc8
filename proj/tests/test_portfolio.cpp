#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "riskmp/riskmp.hpp"

using namespace riskmp;
using Catch::Matchers::WithinAbs;

TEST_CASE("per-atom coefficients", "[portfolio]") {
  PortfolioParams p;
  p.allow_zero_lower = true;
  p.phi_low = 0.0;
  const ModelSpec m = build_portfolio_model(p, std::vector<double>{0.0, 0.4, 1.0});
  const std::vector<double> x{0.0};
  double b = 0.0;
  double s = 0.0;
  m.drift(0.0, x, m.actions[0], MutVec(&b, 1));
  CHECK(b == p.r);
  m.drift(0.0, x, m.actions[2], MutVec(&b, 1));
  CHECK_THAT(b, WithinAbs(p.r + (p.mu - p.r) - 0.5 * p.sigma * p.sigma, 1e-15));
  m.diffusion(0.0, x, m.actions[1], MutVec(&s, 1));
  CHECK_THAT(s, WithinAbs(p.sigma * 0.4, 1e-15));
}

TEST_CASE("bounds validation", "[portfolio]") {
  PortfolioParams p;
  p.phi_low = 0.0;
  CHECK_THROWS_AS(p.validate(), Error);
  p.allow_zero_lower = true;
  CHECK_NOTHROW(p.validate());
  p.phi_high = -1.0;
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("Merton allocation", "[portfolio]") {
  PortfolioParams p;
  CHECK_THAT(merton_allocation(p), WithinAbs(oracles::kMerton, 1e-15));
  p.mu = p.r + 1.0;
  p.sigma = 0.5;
  CHECK(merton_allocation(p) == 1.5);
  p.mu = p.r;
  CHECK(merton_allocation(p) == 0.1);
}

TEST_CASE("risk premium and allocation from adjoints", "[portfolio]") {
  PortfolioParams p;
  p.sigma = 0.2;
  RiskAdjustment ra;
  ra.n_paths = 1;
  ra.n_steps = 3;
  ra.dim_w = 1;
  ra.yp = {1.0, 1.0, 1.0, 1.0};
  ra.zp = {0.1, 0.0, -0.06};
  const auto iota = risk_premium(ra, p.sigma);
  CHECK_THAT(iota.at(0, 0), WithinAbs(0.02, 1e-15));
  CHECK(iota.at(0, 1) == 0.0);
  const auto phi = optimal_allocation_from_adjoints(ra, p);
  CHECK_THAT(phi[1], WithinAbs(p.clip(0.06 / 0.04), 1e-15));
  // iota = -(mu - r) pushes the allocation to the lower bound.
  ra.zp = {-0.3, 5.0, 0.0};
  const auto clipped = optimal_allocation_from_adjoints(ra, p);
  CHECK(clipped[0] == p.phi_low);
  CHECK(clipped[1] == p.phi_high);
  ra.yp[1] = -0.1;
  try {
    (void)risk_premium(ra, p.sigma);
    FAIL("expected NonPositiveAdjustment");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonPositiveAdjustment);
  }
}

TEST_CASE("brute force over constant policies", "[portfolio]") {
  const PortfolioParams p;
  const auto phi = uniform_phi_grid(p, 31);
  const TimeGrid g(1.0, 50);
  const auto d = sample_brownian(g, 20000, 1, 42, Execution{4});
  SECTION("expectation lands within one grid spacing of Merton") {
    const auto bf = brute_force_constant_policy(p, RiskFunction::expectation(), phi, d, g, Execution{4});
    CHECK(std::abs(bf.best_phi - merton_allocation(p)) <= phi[1] - phi[0]);
  }
  SECTION("entropic values match the closed form") {
    const auto bf = brute_force_constant_policy(p, RiskFunction::entropic(1.0), phi, d, g, Execution{4});
    for (std::size_t a = 0; a < 31; ++a) {
      CHECK_THAT(entropic_constant_value(p, phi[a], 1.0), WithinAbs(oracles::kEntropicTable[a], 1e-15));
      CHECK(std::abs(bf.value[a] - oracles::kEntropicTable[a]) <= 3.0 * bf.se[a]);
    }
    const auto rn = brute_force_constant_policy(p, RiskFunction::expectation(), phi, d, g, Execution{4});
    CHECK(bf.best_phi <= rn.best_phi);
  }
  SECTION("single-point grid") {
    const auto bf = brute_force_constant_policy(p, RiskFunction::expectation(), {0.7}, d, g, Execution{4});
    CHECK(bf.best_phi == 0.7);
  }
}

TEST_CASE("y' stays positive under semideviation and entropic risk", "[portfolio]") {
  const PortfolioParams p;
  const ModelSpec m = build_portfolio_model(p, 31);
  const TimeGrid g(1.0, 25);
  const auto d = sample_brownian(g, 4000, 1, 3);
  for (const auto& r : {RiskFunction::smoothed_semideviation(0.5, 0.1), RiskFunction::entropic(1.0)}) {
    const auto an = analyze_policy(m, r, MeasurePolicy::uniform(25, 31), d, g, RegressionBasis{});
    for (double v : an.adjoints.adjustment.yp) REQUIRE(v > 0.0);
    CHECK_NOTHROW(risk_premium(an.adjoints.adjustment, p.sigma));
  }
}
