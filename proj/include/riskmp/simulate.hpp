#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "riskmp/brownian.hpp"
#include "riskmp/errors.hpp"
#include "riskmp/model.hpp"
#include "riskmp/parallel.hpp"
#include "riskmp/policy.hpp"
#include "riskmp/time_grid.hpp"

namespace riskmp {

/// Simulated forward system on a shared grid. Immutable once built.
class PathEnsemble {
 public:
  PathEnsemble(TimeGrid grid, std::size_t n_paths, std::size_t dim_x, std::vector<double> states,
               std::vector<double> running, std::shared_ptr<const BrownianDriver> driver, MeasurePolicy policy)
      : grid_(std::move(grid)),
        n_paths_(n_paths),
        dim_x_(dim_x),
        states_(std::move(states)),
        running_(std::move(running)),
        driver_(std::move(driver)),
        policy_(std::move(policy)) {}

  const TimeGrid& grid() const { return grid_; }
  std::size_t n_paths() const { return n_paths_; }
  std::size_t n_steps() const { return grid_.n_steps(); }
  std::size_t dim_x() const { return dim_x_; }
  std::size_t dim_w() const { return driver_->dim_w(); }
  const BrownianDriver& driver() const { return *driver_; }
  const std::shared_ptr<const BrownianDriver>& driver_ptr() const { return driver_; }
  const MeasurePolicy& policy() const { return policy_; }

  std::span<const double> state(std::size_t path, std::size_t step) const {
    return {states_.data() + (path * (n_steps() + 1) + step) * dim_x_, dim_x_};
  }
  double running_cost(std::size_t path, std::size_t step) const { return running_[path * (n_steps() + 1) + step]; }
  std::span<const double> dw(std::size_t path, std::size_t step) const { return driver_->dw(path, step); }

  /// States of all paths at one step as an (n_paths x dim_x) table.
  std::vector<double> slice(std::size_t step) const {
    std::vector<double> out(n_paths_ * dim_x_);
    for (std::size_t i = 0; i < n_paths_; ++i) {
      const auto s = state(i, step);
      std::copy(s.begin(), s.end(), out.begin() + static_cast<std::ptrdiff_t>(i * dim_x_));
    }
    return out;
  }

  const std::vector<double>& states() const { return states_; }
  const std::vector<double>& running() const { return running_; }

 private:
  TimeGrid grid_;
  std::size_t n_paths_;
  std::size_t dim_x_;
  std::vector<double> states_;   // [path][step][dim_x]
  std::vector<double> running_;  // [path][step]
  std::shared_ptr<const BrownianDriver> driver_;
  MeasurePolicy policy_;
};

namespace detail {

inline void check_compatible(const ModelSpec& model, const MeasurePolicy& policy, const BrownianDriver& driver,
                             const TimeGrid& grid) {
  model.validate();
  if (driver.dim_w() != model.dim_w) throw Error(Errc::InvalidArgument, "driver and model disagree on dim_w");
  if (driver.n_steps() != grid.n_steps()) throw Error(Errc::InvalidArgument, "driver and grid disagree on n_steps");
  if (std::abs(driver.dt() - grid.dt()) > 1e-15 * grid.dt()) {
    throw Error(Errc::InvalidArgument, "driver and grid disagree on dt");
  }
  if (policy.n_steps() != grid.n_steps()) throw Error(Errc::InvalidArgument, "policy is not defined on every step");
  if (policy.n_actions() != model.n_actions()) throw Error(Errc::InvalidArgument, "policy and action grid disagree");
}

}  // namespace detail

/// Euler-Maruyama for the vague-controlled SDE. Coefficients are averaged
/// against the measure before the diffusion multiplies dw; the running cost
/// uses the left-endpoint rule.
inline PathEnsemble simulate_forward(const ModelSpec& model, const MeasurePolicy& policy,
                                     std::shared_ptr<const BrownianDriver> driver, const TimeGrid& grid,
                                     const Execution& exec = {}) {
  detail::check_compatible(model, policy, *driver, grid);
  const std::size_t n = grid.n_steps();
  const std::size_t np = driver->n_paths();
  const std::size_t dx = model.dim_x;
  const std::size_t dw = model.dim_w;
  const std::size_t na = model.n_actions();
  const double dt = grid.dt();
  std::vector<double> states(np * (n + 1) * dx);
  std::vector<double> running(np * (n + 1));

  parallel_for(np, exec, [&](std::size_t begin, std::size_t end) {
    std::vector<double> w(na), b(dx), s(dx * dw), bavg(dx), savg(dx * dw);
    for (std::size_t i = begin; i < end; ++i) {
      double* xi = states.data() + i * (n + 1) * dx;
      double* ci = running.data() + i * (n + 1);
      model.initial(i, driver->initial_stream(i), MutVec(xi, dx));
      ci[0] = 0.0;
      for (std::size_t d = 0; d < dx; ++d) {
        if (!std::isfinite(xi[d])) throw Error(Errc::NumericalBlowup, "non-finite initial state", 0);
      }
      for (std::size_t k = 0; k < n; ++k) {
        const double t = grid.t(k);
        const ConstVec x(xi + k * dx, dx);
        policy.weights(k, x, w);
        std::fill(bavg.begin(), bavg.end(), 0.0);
        std::fill(savg.begin(), savg.end(), 0.0);
        double cavg = 0.0;
        for (std::size_t a = 0; a < na; ++a) {
          const double wa = w[a];
          if (wa == 0.0) continue;
          const ConstVec act = model.actions[a];
          model.drift(t, x, act, b);
          model.diffusion(t, x, act, s);
          for (std::size_t d = 0; d < dx; ++d) bavg[d] += wa * b[d];
          for (std::size_t e = 0; e < dx * dw; ++e) savg[e] += wa * s[e];
          cavg += wa * model.cost(t, x, act);
        }
        const auto inc = driver->dw(i, k);
        double* xn = xi + (k + 1) * dx;
        for (std::size_t d = 0; d < dx; ++d) {
          double noise = 0.0;
          for (std::size_t j = 0; j < dw; ++j) noise += savg[d * dw + j] * inc[j];
          xn[d] = x[d] + bavg[d] * dt + noise;
          if (!std::isfinite(xn[d])) {
            throw Error(Errc::NumericalBlowup, "non-finite state on path " + std::to_string(i), k + 1);
          }
        }
        ci[k + 1] = ci[k] + cavg * dt;
        if (!std::isfinite(ci[k + 1])) {
          throw Error(Errc::NumericalBlowup, "non-finite running cost on path " + std::to_string(i), k + 1);
        }
      }
    }
  });
  return PathEnsemble(grid, np, dx, std::move(states), std::move(running), std::move(driver), policy);
}

/// C_i = x'_i(T) + g(x_i(T)).
inline std::vector<double> total_cost(const PathEnsemble& ensemble, const ModelSpec& model) {
  const std::size_t n = ensemble.n_steps();
  std::vector<double> out(ensemble.n_paths());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = ensemble.running_cost(i, n) + model.terminal(ensemble.state(i, n));
  }
  return out;
}

/// First-order response (delta, delta') of the state and running cost to the
/// perturbation pi -> pi(alpha, q), driven by the ensemble's own increments.
struct VariationalPaths {
  std::size_t n_paths = 0;
  std::size_t n_steps = 0;
  std::size_t dim_x = 0;
  std::vector<double> delta;        // [path][step][dim_x]
  std::vector<double> delta_prime;  // [path][step]

  std::span<const double> at(std::size_t path, std::size_t step) const {
    return {delta.data() + (path * (n_steps + 1) + step) * dim_x, dim_x};
  }
  double prime_at(std::size_t path, std::size_t step) const { return delta_prime[path * (n_steps + 1) + step]; }
};

inline VariationalPaths simulate_variational(const ModelSpec& model, const PathEnsemble& ensemble,
                                             const MeasurePolicy& q, const Execution& exec = {}) {
  const MeasurePolicy& pi = ensemble.policy();
  detail::check_compatible(model, q, ensemble.driver(), ensemble.grid());
  const std::size_t n = ensemble.n_steps();
  const std::size_t np = ensemble.n_paths();
  const std::size_t dx = model.dim_x;
  const std::size_t dw = model.dim_w;
  const std::size_t na = model.n_actions();
  const double dt = ensemble.grid().dt();
  VariationalPaths out;
  out.n_paths = np;
  out.n_steps = n;
  out.dim_x = dx;
  out.delta.assign(np * (n + 1) * dx, 0.0);
  out.delta_prime.assign(np * (n + 1), 0.0);

  parallel_for(np, exec, [&](std::size_t begin, std::size_t end) {
    std::vector<double> wp(na), wq(na), b(dx), s(dx * dw), jb(dx * dx), js(dx * dw * dx), gc(dx);
    std::vector<double> drift(dx), diff(dx * dw);
    for (std::size_t i = begin; i < end; ++i) {
      double* di = out.delta.data() + i * (n + 1) * dx;
      double* dpi = out.delta_prime.data() + i * (n + 1);
      for (std::size_t k = 0; k < n; ++k) {
        const double t = ensemble.grid().t(k);
        const ConstVec x = ensemble.state(i, k);
        const ConstVec delta(di + k * dx, dx);
        pi.weights(k, x, wp);
        q.weights(k, x, wq);
        std::fill(drift.begin(), drift.end(), 0.0);
        std::fill(diff.begin(), diff.end(), 0.0);
        double cterm = 0.0;
        for (std::size_t a = 0; a < na; ++a) {
          const double w_pi = wp[a];
          const double w_diff = wq[a] - wp[a];
          if (w_pi == 0.0 && w_diff == 0.0) continue;
          const ConstVec act = model.actions[a];
          if (w_pi != 0.0) {
            model.drift_jacobian(t, x, act, jb);
            model.diffusion_jacobian(t, x, act, js);
            model.cost_gradient(t, x, act, gc);
            for (std::size_t r = 0; r < dx; ++r) {
              double v = 0.0;
              for (std::size_t l = 0; l < dx; ++l) v += jb[r * dx + l] * delta[l];
              drift[r] += w_pi * v;
            }
            for (std::size_t e = 0; e < dx * dw; ++e) {
              double v = 0.0;
              for (std::size_t l = 0; l < dx; ++l) v += js[e * dx + l] * delta[l];
              diff[e] += w_pi * v;
            }
            double v = 0.0;
            for (std::size_t l = 0; l < dx; ++l) v += gc[l] * delta[l];
            cterm += w_pi * v;
          }
          if (w_diff != 0.0) {
            model.drift(t, x, act, b);
            model.diffusion(t, x, act, s);
            for (std::size_t r = 0; r < dx; ++r) drift[r] += w_diff * b[r];
            for (std::size_t e = 0; e < dx * dw; ++e) diff[e] += w_diff * s[e];
            cterm += w_diff * model.cost(t, x, act);
          }
        }
        const auto inc = ensemble.dw(i, k);
        double* dn = di + (k + 1) * dx;
        for (std::size_t r = 0; r < dx; ++r) {
          double noise = 0.0;
          for (std::size_t j = 0; j < dw; ++j) noise += diff[r * dw + j] * inc[j];
          dn[r] = delta[r] + drift[r] * dt + noise;
          if (!std::isfinite(dn[r])) throw Error(Errc::NumericalBlowup, "non-finite variational state", k + 1);
        }
        dpi[k + 1] = dpi[k] + cterm * dt;
      }
    }
  });
  return out;
}

}  // namespace riskmp
