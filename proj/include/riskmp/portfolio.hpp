#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <vector>

#include "riskmp/adjoint.hpp"
#include "riskmp/brownian.hpp"
#include "riskmp/control.hpp"
#include "riskmp/errors.hpp"
#include "riskmp/feasibility.hpp"
#include "riskmp/model.hpp"
#include "riskmp/parallel.hpp"
#include "riskmp/policy.hpp"
#include "riskmp/risk.hpp"
#include "riskmp/time_grid.hpp"

namespace riskmp {

/// Log-wealth portfolio with one risky asset and allocation phi.
struct PortfolioParams {
  double r = 0.02;
  double mu = 0.08;
  double sigma = 0.3;
  double phi_low = 0.1;
  double phi_high = 1.5;
  double x0 = 0.0;
  double T = 1.0;
  bool allow_zero_lower = false;  // permit phi_low = 0 for baselines

  void validate() const {
    if (!std::isfinite(r) || !std::isfinite(mu) || !std::isfinite(x0)) {
      throw Error(Errc::InvalidArgument, "portfolio parameters must be finite");
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(Errc::InvalidArgument, "sigma must be positive");
    if (!(T > 0.0) || !std::isfinite(T)) throw Error(Errc::NonPositiveHorizon, "T must be positive");
    const bool low_ok = allow_zero_lower ? phi_low >= 0.0 : phi_low > 0.0;
    if (!low_ok || !(phi_low < phi_high) || !std::isfinite(phi_high)) {
      throw Error(Errc::InvalidBounds, "allocation bounds must satisfy 0 < phi_low < phi_high < inf");
    }
  }

  double clip(double phi) const { return std::clamp(phi, phi_low, phi_high); }
};

/// n points spaced uniformly on [phi_low, phi_high].
inline std::vector<double> uniform_phi_grid(const PortfolioParams& params, std::size_t n) {
  if (n < 2) throw Error(Errc::InvalidArgument, "the allocation grid needs at least two points");
  std::vector<double> g(n);
  const double h = (params.phi_high - params.phi_low) / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) g[k] = params.phi_low + h * static_cast<double>(k);
  g.back() = params.phi_high;
  return g;
}

inline double portfolio_drift(const PortfolioParams& p, double phi) {
  return p.r + (p.mu - p.r) * phi - 0.5 * p.sigma * p.sigma * phi * phi;
}

/// Per-atom coefficients b = r + (mu - r) phi - sigma^2 phi^2 / 2,
/// sigma(phi) = sigma phi, c = 0, g(x) = -x, nu = delta_{x0}.
inline ModelSpec build_portfolio_model(const PortfolioParams& params, const std::vector<double>& phi_grid) {
  params.validate();
  if (phi_grid.empty()) throw Error(Errc::InvalidArgument, "empty allocation grid");
  for (double phi : phi_grid) {
    if (!(phi >= params.phi_low && phi <= params.phi_high)) {
      throw Error(Errc::InvalidBounds, "allocation grid leaves [phi_low, phi_high]");
    }
  }
  ModelSpec m;
  m.dim_x = 1;
  m.dim_w = 1;
  m.actions = ActionGrid::scalar(phi_grid);
  const PortfolioParams p = params;
  m.drift = [p](double, ConstVec, ConstVec a, MutVec out) { out[0] = portfolio_drift(p, a[0]); };
  m.diffusion = [p](double, ConstVec, ConstVec a, MutVec out) { out[0] = p.sigma * a[0]; };
  m.cost = [](double, ConstVec, ConstVec) { return 0.0; };
  m.terminal = [](ConstVec x) { return -x[0]; };
  m.drift_jacobian = [](double, ConstVec, ConstVec, MutVec out) { out[0] = 0.0; };
  m.diffusion_jacobian = [](double, ConstVec, ConstVec, MutVec out) { out[0] = 0.0; };
  m.cost_gradient = [](double, ConstVec, ConstVec, MutVec out) { out[0] = 0.0; };
  m.terminal_gradient = [](ConstVec, MutVec out) { out[0] = -1.0; };
  m.initial = point_mass({p.x0});
  return m;
}

inline ModelSpec build_portfolio_model(const PortfolioParams& params, std::size_t n_actions) {
  params.validate();
  return build_portfolio_model(params, uniform_phi_grid(params, n_actions));
}

/// Growth exponents of the portfolio problem with risk order p and state
/// integrability pbar.
inline FeasibilityConfig portfolio_feasibility(double p = 2.0, double pbar = 8.0) {
  FeasibilityConfig cfg;
  cfg.pbar1 = 0.0;
  cfg.pbar2 = 0.0;
  cfg.pbar3 = std::numeric_limits<double>::infinity();
  cfg.pbar = pbar;
  cfg.p1 = 1.0;
  cfg.p2 = 0.0;
  cfg.p1_prime = 0.0;
  cfg.p2_prime = 0.0;
  cfg.p = p;
  return cfg;
}

inline double merton_allocation(const PortfolioParams& params) {
  return params.clip((params.mu - params.r) / (params.sigma * params.sigma));
}

/// iota = sigma z' / y', per (path, step) on steps 0..n-1.
struct RiskPremiumPath {
  std::size_t n_paths = 0;
  std::size_t n_steps = 0;
  std::vector<double> iota;  // [path][step]

  double at(std::size_t path, std::size_t step) const { return iota[path * n_steps + step]; }
};

inline RiskPremiumPath risk_premium(const RiskAdjustment& ra, double sigma) {
  RiskPremiumPath out;
  out.n_paths = ra.n_paths;
  out.n_steps = ra.n_steps;
  out.iota.resize(ra.n_paths * ra.n_steps);
  for (std::size_t i = 0; i < ra.n_paths; ++i) {
    for (std::size_t k = 0; k < ra.n_steps; ++k) {
      const double yp = ra.yp_at(i, k);
      if (!(yp > 0.0)) throw Error(Errc::NonPositiveAdjustment, "risk adjustment is not positive", k);
      out.iota[i * ra.n_steps + k] = sigma * ra.zp_at(i, k) / yp;
    }
  }
  return out;
}

/// phi = clip((mu - r + iota) / sigma^2) per (path, step).
inline std::vector<double> optimal_allocation_from_adjoints(const RiskAdjustment& ra, const PortfolioParams& params) {
  const RiskPremiumPath iota = risk_premium(ra, params.sigma);
  std::vector<double> phi(iota.iota.size());
  const double s2 = params.sigma * params.sigma;
  for (std::size_t e = 0; e < phi.size(); ++e) phi[e] = params.clip((params.mu - params.r + iota.iota[e]) / s2);
  return phi;
}

struct BruteForceResult {
  double best_phi = 0.0;
  double best_value = 0.0;
  std::size_t best_index = 0;
  std::vector<double> phi;
  std::vector<double> value;
  std::vector<double> se;
};

/// rho of every constant Dirac allocation on the shared driver.
inline BruteForceResult brute_force_constant_policy(const PortfolioParams& params, const RiskFunction& risk,
                                                    const std::vector<double>& phi_grid,
                                                    std::shared_ptr<const BrownianDriver> driver, const TimeGrid& grid,
                                                    const Execution& exec = {}) {
  const ModelSpec model = build_portfolio_model(params, phi_grid);
  BruteForceResult out;
  out.phi = phi_grid;
  out.value.resize(phi_grid.size());
  out.se.resize(phi_grid.size());
  for (std::size_t a = 0; a < phi_grid.size(); ++a) {
    const auto pol = MeasurePolicy::dirac(grid.n_steps(), phi_grid.size(), a);
    const ObjectiveEstimate est = estimate_objective(model, risk, pol, driver, grid, exec);
    out.value[a] = est.value;
    out.se[a] = est.se;
  }
  out.best_index = static_cast<std::size_t>(std::min_element(out.value.begin(), out.value.end()) - out.value.begin());
  out.best_phi = phi_grid[out.best_index];
  out.best_value = out.value[out.best_index];
  return out;
}

/// Entropic risk of -x_T for a constant allocation: x_T is Gaussian with
/// mean x0 + b(phi) T and variance sigma^2 phi^2 T.
inline double entropic_constant_value(const PortfolioParams& p, double phi, double theta) {
  return -p.x0 - portfolio_drift(p, phi) * p.T + 0.5 * theta * p.sigma * p.sigma * phi * phi * p.T;
}

}  // namespace riskmp
