#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "riskmp/riskmp.hpp"

using namespace riskmp;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ModelSpec constant_model(double b, double s, double c) {
  CoefficientTable t;
  t.actions = {0.0, 1.0};
  t.b0 = {b, b};
  t.b1 = {0.0, 0.0};
  t.s0 = {s, s};
  t.s1 = {0.0, 0.0};
  t.c0 = {c, c};
  t.c1 = {0.0, 0.0};
  return table_model(t);
}

}  // namespace

TEST_CASE("time grid nodes", "[sde_core]") {
  CHECK(TimeGrid(1.0, 4).nodes() == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK(TimeGrid(2.0, 1).nodes() == std::vector<double>{0.0, 2.0});
  CHECK(build_time_grid(1.0, 4).dt() == 0.25);
}

TEST_CASE("time grid rejects bad input", "[sde_core]") {
  auto code = [](double h, std::size_t n) {
    try {
      TimeGrid g(h, n);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::InvalidArgument;
  };
  CHECK(code(1.0, 0) == Errc::ZeroSteps);
  CHECK(code(0.0, 4) == Errc::NonPositiveHorizon);
  CHECK(code(-1.0, 4) == Errc::NonPositiveHorizon);
}

TEST_CASE("brownian draws are reproducible and shaped", "[sde_core]") {
  const TimeGrid g(1.0, 5);
  const auto a = sample_brownian(g, 100, 2, 9);
  const auto b = sample_brownian(g, 100, 2, 9);
  const auto c = sample_brownian(g, 100, 2, 10);
  CHECK(a->increments() == b->increments());
  CHECK(a->increments() != c->increments());
  CHECK(a->increments().size() == 100 * 5 * 2);
  CHECK(sample_brownian(TimeGrid(1.0, 1), 7, 1, 1)->increments().size() == 7);
}

TEST_CASE("brownian per-step variance within 3 SE of dt", "[sde_core]") {
  const TimeGrid g(1.0, 50);
  const std::size_t n = 100000;
  const auto d = sample_brownian(g, n, 1, 2024, Execution{4});
  const double se = g.dt() * std::sqrt(2.0 / static_cast<double>(n - 1));
  std::vector<double> col(n);
  std::size_t outside = 0;
  for (std::size_t k = 0; k < g.n_steps(); ++k) {
    for (std::size_t i = 0; i < n; ++i) col[i] = d->dw(i, k)[0];
    const MeanStats s = mean_stats(col);
    if (std::abs(s.sd * s.sd - g.dt()) > 3.0 * se) ++outside;
  }
  CHECK(outside == 0);
}

TEST_CASE("thread count does not change draws or paths", "[sde_core]") {
  const ModelSpec m = build_portfolio_model(PortfolioParams{}, 5);
  const TimeGrid g(1.0, 20);
  const auto d1 = sample_brownian(g, 3001, 1, 5, Execution{1});
  const auto d4 = sample_brownian(g, 3001, 1, 5, Execution{4});
  REQUIRE(d1->increments() == d4->increments());
  const auto pol = MeasurePolicy::uniform(20, 5);
  const auto e1 = simulate_forward(m, pol, d1, g, Execution{1});
  const auto e4 = simulate_forward(m, pol, d4, g, Execution{4});
  CHECK(e1.states() == e4.states());
  CHECK(e1.running() == e4.running());
}

TEST_CASE("zero coefficients keep the state fixed", "[sde_core]") {
  ModelSpec m = constant_model(0.0, 0.0, 1.0);
  m.initial = point_mass({0.7});
  const TimeGrid g(1.0, 10);
  const auto e = simulate_forward(m, MeasurePolicy::uniform(10, 2), sample_brownian(g, 50, 1, 3), g);
  for (std::size_t i = 0; i < 50; ++i) {
    for (std::size_t k = 0; k <= 10; ++k) CHECK(e.state(i, k)[0] == 0.7);
    CHECK_THAT(e.running_cost(i, 10), WithinAbs(1.0, 1e-14));
  }
}

TEST_CASE("constant drift under a Dirac policy", "[sde_core]") {
  const ModelSpec m = table_model([] {
    CoefficientTable t;
    t.actions = {0.0, 1.0};
    t.b0 = {0.0, 1.0};
    t.b1 = {0.0, 0.0};
    t.s0 = {0.0, 0.0};
    t.s1 = {0.0, 0.0};
    t.c0 = {0.0, 0.0};
    t.c1 = {0.0, 0.0};
    return t;
  }());
  const TimeGrid g(1.0, 16);
  const auto e = simulate_forward(m, MeasurePolicy::dirac(16, 2, 1), sample_brownian(g, 8, 1, 1), g);
  for (std::size_t i = 0; i < 8; ++i) CHECK_THAT(e.state(i, 16)[0], WithinAbs(1.0, 1e-15));
}

TEST_CASE("Example 1 mixture and strict controls", "[sde_core]") {
  const ModelSpec m = example1_model();
  const TimeGrid g(1.0, 50);
  const auto d = sample_brownian(g, 10000, 1, 77);
  const auto mixed = simulate_forward(m, MeasurePolicy::uniform(50, 2), d, g);
  for (double v : mixed.states()) REQUIRE(v == 0.0);
  for (std::size_t atom : {0u, 1u}) {
    const auto e = simulate_forward(m, MeasurePolicy::dirac(50, 2, atom), d, g);
    std::vector<double> sq(10000);
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = e.state(i, 50)[0] * e.state(i, 50)[0];
    const MeanStats s = mean_stats(sq);
    CHECK(std::abs(s.mean - 1.0) <= 3.0 * s.se);
  }
}

TEST_CASE("total cost", "[sde_core]") {
  const TimeGrid g(1.0, 10);
  const auto d = sample_brownian(g, 20, 1, 4);
  SECTION("identity terminal returns x_T") {
    ModelSpec m = constant_model(0.3, 0.5, 0.0);
    m.terminal = [](ConstVec x) { return x[0]; };
    const auto e = simulate_forward(m, MeasurePolicy::dirac(10, 2, 0), d, g);
    const auto c = total_cost(e, m);
    for (std::size_t i = 0; i < 20; ++i) CHECK(c[i] == e.state(i, 10)[0]);
  }
  SECTION("unit running cost integrates to T") {
    const ModelSpec m = constant_model(0.3, 0.5, 1.0);
    const auto c = total_cost(simulate_forward(m, MeasurePolicy::dirac(10, 2, 0), d, g), m);
    for (double v : c) CHECK_THAT(v, WithinAbs(1.0, 1e-14));
  }
  SECTION("portfolio cost is -x_T") {
    const ModelSpec m = build_portfolio_model(PortfolioParams{}, 5);
    const auto e = simulate_forward(m, MeasurePolicy::dirac(10, 5, 2), d, g);
    const auto c = total_cost(e, m);
    for (std::size_t i = 0; i < 20; ++i) CHECK(c[i] == -e.state(i, 10)[0]);
  }
}

TEST_CASE("convex combination of policies", "[sde_core]") {
  const auto p = MeasurePolicy::dirac(3, 2, 0);
  const auto q = MeasurePolicy::dirac(3, 2, 1);
  const std::vector<double> x{0.0};
  CHECK(convex_combine(p, q, 0.0).weights(1, x) == std::vector<double>{1.0, 0.0});
  CHECK(convex_combine(p, q, 1.0).weights(1, x) == std::vector<double>{0.0, 1.0});
  CHECK(convex_combine(p, q, 0.5).weights(1, x) == std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS(convex_combine(p, q, 1.5), Error);
  CHECK_THROWS_AS(convex_combine(p, MeasurePolicy::dirac(4, 2, 0), 0.5), Error);
}

TEST_CASE("variational paths", "[sde_core]") {
  const TimeGrid g(1.0, 20);
  const auto d = sample_brownian(g, 500, 1, 8);
  SECTION("q = pi gives zero variation") {
    const ModelSpec m = nonlinear_test_model();
    const auto pi = MeasurePolicy::dirac(20, 2, 0);
    const auto v = simulate_variational(m, simulate_forward(m, pi, d, g), pi);
    for (double e : v.delta) CHECK(e == 0.0);
    for (double e : v.delta_prime) CHECK(e == 0.0);
  }
  SECTION("linear model matches a finite difference") {
    const ModelSpec m = linear_test_model();
    const auto pi = MeasurePolicy::dirac(20, 2, 0);
    const auto q = MeasurePolicy::dirac(20, 2, 1);
    const auto base = simulate_forward(m, pi, d, g);
    const auto v = simulate_variational(m, base, q);
    const double alpha = 1e-3;
    const auto pert = simulate_forward(m, convex_combine(pi, q, alpha), d, g);
    for (std::size_t i = 0; i < 500; ++i) {
      for (std::size_t k = 1; k <= 20; ++k) {
        const double fd = (pert.state(i, k)[0] - base.state(i, k)[0]) / alpha;
        REQUIRE_THAT(v.at(i, k)[0], WithinRel(fd, 1e-2));
        const double fdc = (pert.running_cost(i, k) - base.running_cost(i, k)) / alpha;
        if (k > 1) REQUIRE_THAT(v.prime_at(i, k), WithinRel(fdc, 1e-2));
      }
    }
  }
}

TEST_CASE("linearization residual shrinks faster than alpha", "[sde_core]") {
  const auto r = linearization_ratios({0.2, 0.1, 0.05}, 10000, 50, 31);
  CHECK(r[1] <= r[0]);
  CHECK(r[2] <= r[1]);
}

TEST_CASE("Example 2 response is O(eps^2)", "[sde_core]") {
  for (double eps : {0.1, 0.05, 0.025}) CHECK(example2_response(eps, 10000, 50, 1.0, 13) <= 4.0 * eps * eps);
}

TEST_CASE("model gradients agree with finite differences", "[sde_core]") {
  for (const ModelSpec& m : {build_portfolio_model(PortfolioParams{}, 5), example1_model(), example2_model(),
                             linear_test_model(), nonlinear_test_model()}) {
    CHECK(check_model_gradients(m, 50, 3).passed());
  }
}

TEST_CASE("feasibility", "[sde_core]") {
  CHECK(check_feasibility(portfolio_feasibility(2.0, 8.0)).feasible());
  FeasibilityConfig eq = portfolio_feasibility(2.0, 2.0);
  const auto r = check_feasibility(eq);
  CHECK_FALSE(r.feasible());
  const auto v = r.violations();
  CHECK(std::find(v.begin(), v.end(), "p < pbar") != v.end());
  FeasibilityConfig edge = portfolio_feasibility(2.0, 8.0);
  edge.p1 = edge.pbar / edge.p - 1.0;
  CHECK_FALSE(check_feasibility(edge).feasible());
}

TEST_CASE("blow-up is reported with its step", "[sde_core]") {
  ModelSpec m = constant_model(0.0, 0.0, 0.0);
  m.drift = [](double, ConstVec x, ConstVec, MutVec out) { out[0] = 1e300 * (1.0 + x[0] * x[0]); };
  const TimeGrid g(1.0, 10);
  try {
    (void)simulate_forward(m, MeasurePolicy::dirac(10, 2, 0), sample_brownian(g, 4, 1, 1), g);
    FAIL("expected NumericalBlowup");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NumericalBlowup);
    CHECK(e.step().has_value());
  }
}
