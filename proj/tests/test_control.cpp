#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "riskmp/riskmp.hpp"

using namespace riskmp;
using Catch::Matchers::WithinAbs;

TEST_CASE("Hamiltonian reduces to its parts", "[control]") {
  const ModelSpec m = nonlinear_test_model();
  const std::vector<double> x{0.4};
  const std::vector<double> a{1.5};
  const std::vector<double> zero{0.0};
  const std::vector<double> y{2.0};
  CHECK_THAT(hamiltonian({0.0, x, zero, 1.0, zero}, a, m), WithinAbs(0.5 * 0.4 * 0.4, 1e-15));
  CHECK_THAT(hamiltonian({0.0, x, y, 0.0, zero}, a, m), WithinAbs(2.0 * 1.5 * std::sin(0.4), 1e-15));
}

TEST_CASE("portfolio Hamiltonian by hand", "[control]") {
  PortfolioParams p;
  p.sigma = 0.2;
  const ModelSpec m = build_portfolio_model(p, std::vector<double>{0.5});
  const std::vector<double> x{0.0};
  const std::vector<double> y{-1.0};
  const std::vector<double> z{0.3};
  const std::vector<double> a{0.5};
  CHECK_THAT(hamiltonian({0.0, x, y, 1.0, z}, a, m), WithinAbs(oracles::kPortfolioHamiltonian, 1e-15));
}

TEST_CASE("Hamiltonian minimization", "[control]") {
  SECTION("unique minimum gives a Dirac") {
    std::vector<double> out(4);
    const std::vector<double> v{3.0, 1.0, 2.0, 5.0};
    CHECK(minimize_from_values(v, 1e-9, out) == 1.0);
    CHECK(out == std::vector<double>{0.0, 1.0, 0.0, 0.0});
  }
  SECTION("Example 1 geometry") {
    const ModelSpec m = example1_model();
    const std::vector<double> x{0.0};
    const std::vector<double> y{0.0};
    const std::vector<double> z0{0.0};
    const std::vector<double> zm{-1.0};
    CHECK(minimize_hamiltonian({0.0, x, y, 1.0, z0}, m) == std::vector<double>{0.5, 0.5});
    CHECK(minimize_hamiltonian({0.0, x, y, 1.0, zm}, m) == std::vector<double>{0.0, 1.0});
  }
  SECTION("mixture value equals the minimum") {
    const ModelSpec m = build_portfolio_model(PortfolioParams{}, 31);
    const std::vector<double> x{0.0};
    const std::vector<double> y{-1.0};
    const std::vector<double> z{-0.2};
    const HamiltonianContext ctx{0.0, x, y, 1.0, z};
    const auto w = minimize_hamiltonian(ctx, m);
    std::vector<double> vals(31);
    hamiltonian_values(ctx, m, vals);
    CHECK_THAT(hamiltonian_measure(ctx, w, m), WithinAbs(*std::min_element(vals.begin(), vals.end()), 1e-15));
  }
}

TEST_CASE("objective estimates", "[control]") {
  const TimeGrid g(1.0, 20);
  const auto d = sample_brownian(g, 10000, 1, 21);
  SECTION("zero cost") {
    CoefficientTable t;
    t.actions = {0.0, 1.0};
    t.b0 = {0.1, 0.2};
    t.b1 = {0.0, 0.0};
    t.s0 = {1.0, 1.0};
    t.s1 = {0.0, 0.0};
    t.c0 = {0.0, 0.0};
    t.c1 = {0.0, 0.0};
    for (const auto& r : {RiskFunction::expectation(), RiskFunction::entropic(1.0)}) {
      CHECK(objective(table_model(t), r, MeasurePolicy::uniform(20, 2), d, g) == 0.0);
    }
  }
  SECTION("deterministic dynamics") {
    CoefficientTable t;
    t.actions = {0.0, 1.0};
    t.b0 = {0.0, 1.0};
    t.b1 = {0.0, 0.0};
    t.s0 = {0.0, 0.0};
    t.s1 = {0.0, 0.0};
    t.c0 = {0.5, 0.5};
    t.c1 = {0.0, 0.0};
    t.g2 = 2.0;  // g = x^2
    for (const auto& r : {RiskFunction::expectation(), RiskFunction::mean_deviation(0.5), RiskFunction::entropic(3.0)}) {
      CHECK_THAT(objective(table_model(t), r, MeasurePolicy::dirac(20, 2, 1), d, g), WithinAbs(1.0 + 0.5, 1e-12));
    }
    // Softplus smoothing lifts a constant by eps * beta * ln 2.
    CHECK_THAT(objective(table_model(t), RiskFunction::smoothed_semideviation(0.5, 0.1), MeasurePolicy::dirac(20, 2, 1),
                         d, g),
               WithinAbs(1.5 + 0.05 * std::log(2.0), 1e-12));
  }
  SECTION("portfolio expectation matches the Gaussian mean") {
    const PortfolioParams p;
    const auto phi = uniform_phi_grid(p, 31);
    const ModelSpec m = build_portfolio_model(p, phi);
    for (std::size_t a = 0; a < 31; a += 5) {
      const auto est = estimate_objective(m, RiskFunction::expectation(), MeasurePolicy::dirac(20, 31, a), d, g);
      CHECK(std::abs(est.value - oracles::kExpectationTable[a]) <= 3.0 * est.se);
    }
  }
}

TEST_CASE("MSA config validation", "[control]") {
  MsaConfig c;
  c.alpha0 = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = MsaConfig{};
  c.max_iters = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = MsaConfig{};
  CHECK_NOTHROW(c.validate());
  CHECK(c.alpha(0) == 0.5);
  CHECK(c.alpha(10) == 0.25);
}

TEST_CASE("MSA on a cost-free problem stays at zero", "[control]") {
  const ModelSpec m = example1_model();
  ModelSpec free = m;
  free.terminal = [](ConstVec) { return 0.0; };
  free.terminal_gradient = [](ConstVec, MutVec out) { out[0] = 0.0; };
  const TimeGrid g(1.0, 10);
  MsaConfig cfg;
  cfg.max_iters = 5;
  const auto res = msa_solve(free, RiskFunction::expectation(), MeasurePolicy::uniform(10, 2), cfg,
                             sample_brownian(g, 500, 1, 2), RegressionBasis{}, g);
  for (double v : res.report.objective) CHECK(v == 0.0);
  CHECK(res.report.converged);
}

TEST_CASE("MSA recovers the Merton allocation on a small grid", "[control]") {
  const PortfolioParams p;
  const ModelSpec m = build_portfolio_model(p, 31);
  const TimeGrid g(1.0, 20);
  MsaConfig cfg;
  cfg.exec = Execution{4};
  const auto d = sample_brownian(g, 4000, 1, 17, cfg.exec);
  const auto res = msa_solve(m, RiskFunction::expectation(), MeasurePolicy::dirac(20, 31, 15), cfg, d,
                             RegressionBasis{}, g);
  const auto an = analyze_policy(m, RiskFunction::expectation(), res.policy, d, g, RegressionBasis{}, cfg.exec);
  const auto prof = profile_policy(m, res.policy, an.ensemble);
  for (double v : prof.mean_action) CHECK_THAT(v, WithinAbs(oracles::kMerton, 0.05));
  for (double v : prof.entropy) CHECK(v <= kNearDiracEntropy);
  CHECK(res.report.hamiltonian_gap.back() <= 1e-3);
  CHECK(res.report.monotonicity_violations.empty());
}

TEST_CASE("MSA under mean-deviation beats the best constant policy", "[control]") {
  const PortfolioParams p;
  const auto phi = uniform_phi_grid(p, 11);
  const ModelSpec m = build_portfolio_model(p, phi);
  const TimeGrid g(1.0, 20);
  MsaConfig cfg;
  cfg.exec = Execution{4};
  const auto d = sample_brownian(g, 4000, 1, 19, cfg.exec);
  const auto risk = RiskFunction::mean_deviation(0.5);
  const auto res = msa_solve(m, risk, MeasurePolicy::dirac(20, 11, 5), cfg, d, RegressionBasis{}, g);
  const auto bf = brute_force_constant_policy(p, risk, phi, d, g, cfg.exec);
  const auto est = estimate_objective(m, risk, res.policy, d, g, cfg.exec);
  CHECK(est.value <= bf.best_value + 2.0 * bf.se[bf.best_index]);
}
