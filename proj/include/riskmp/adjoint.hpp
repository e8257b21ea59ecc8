#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "riskmp/errors.hpp"
#include "riskmp/model.hpp"
#include "riskmp/numeric.hpp"
#include "riskmp/parallel.hpp"
#include "riskmp/policy.hpp"
#include "riskmp/regression.hpp"
#include "riskmp/simulate.hpp"

namespace riskmp {

/// Risk-adjustment pair (y', z') on an ensemble.
struct RiskAdjustment {
  std::size_t n_paths = 0;
  std::size_t n_steps = 0;
  std::size_t dim_w = 0;
  std::vector<double> yp;              // [path][step], steps 0..n
  std::vector<double> zp;              // [path][step][dim_w], steps 0..n-1
  std::vector<double> residual;        // per-step relative residual of the y' regression

  double yp_at(std::size_t path, std::size_t step) const { return yp[path * (n_steps + 1) + step]; }
  double zp_at(std::size_t path, std::size_t step, std::size_t j = 0) const {
    return zp[(path * n_steps + step) * dim_w + j];
  }
};

/// Adjoint processes (y, z, y', z'). y is a row covector (1 x dim_x), z is
/// dim_w x dim_x with entry (j, i) at j * dim_x + i.
struct AdjointProcesses {
  std::size_t n_paths = 0;
  std::size_t n_steps = 0;
  std::size_t dim_x = 0;
  std::size_t dim_w = 0;
  std::vector<double> y;   // [path][step][dim_x], steps 0..n
  std::vector<double> z;   // [path][step][dim_w][dim_x], steps 0..n-1
  RiskAdjustment adjustment;
  std::vector<double> residual;  // per-step relative residual of the y regression (max over components)

  std::span<const double> y_at(std::size_t path, std::size_t step) const {
    return {y.data() + (path * (n_steps + 1) + step) * dim_x, dim_x};
  }
  std::span<const double> z_at(std::size_t path, std::size_t step) const {
    return {z.data() + (path * n_steps + step) * dim_w * dim_x, dim_w * dim_x};
  }
  double yp_at(std::size_t path, std::size_t step) const { return adjustment.yp_at(path, step); }
  double zp_at(std::size_t path, std::size_t step, std::size_t j = 0) const { return adjustment.zp_at(path, step, j); }
};

namespace detail {

inline double relative(double residual, std::span<const double> target, std::span<const double> w) {
  CompensatedSum sq;
  for (std::size_t i = 0; i < target.size(); ++i) sq.add(w[i] * target[i] * target[i]);
  const double s = std::sqrt(sq.value());
  return s > 0.0 ? residual / s : residual;
}

}  // namespace detail

/// y'_T = D; y'_k = E[D | x_k]; z'_k = E[(y'_{k+1} - y'_k) dw_k | x_k] / dt.
///
/// Subtracting y'_k inside the increment projection does not change the
/// conditional expectation (E[y'_k dw_k | x_k] = 0) and makes z' vanish
/// exactly when D is constant.
inline RiskAdjustment solve_risk_adjustment(const PathEnsemble& ensemble, std::span<const double> D,
                                            const RegressionBasis& basis) {
  const std::size_t np = ensemble.n_paths();
  const std::size_t n = ensemble.n_steps();
  const std::size_t dw = ensemble.dim_w();
  const double dt = ensemble.grid().dt();
  if (D.size() != np) throw Error(Errc::InvalidArgument, "derivative sample has the wrong length");
  RiskAdjustment out;
  out.n_paths = np;
  out.n_steps = n;
  out.dim_w = dw;
  out.yp.assign(np * (n + 1), 0.0);
  out.zp.assign(np * n * dw, 0.0);
  out.residual.assign(n + 1, 0.0);
  for (std::size_t i = 0; i < np; ++i) out.yp[i * (n + 1) + n] = D[i];

  std::vector<double> fitted(np), target(np);
  for (std::size_t k = n; k-- > 0;) {
    const auto states = ensemble.slice(k);
    const LeastSquaresProjector proj(basis, states, ensemble.dim_x());
    const double res = proj.fit(D, fitted);
    out.residual[k] = detail::relative(res, D, proj.weights());
    for (std::size_t i = 0; i < np; ++i) out.yp[i * (n + 1) + k] = fitted[i];
    for (std::size_t j = 0; j < dw; ++j) {
      for (std::size_t i = 0; i < np; ++i) {
        const double incr = out.yp[i * (n + 1) + k + 1] - out.yp[i * (n + 1) + k];
        target[i] = incr * ensemble.dw(i, k)[j] / dt;
      }
      proj.fit(target, fitted);
      for (std::size_t i = 0; i < np; ++i) out.zp[(i * n + k) * dw + j] = fitted[i];
    }
  }
  return out;
}

/// grad_x H(t, x, y, y', z, pi) = sum_a pi_a [ y grad_x b + y' grad_x c + d/dx tr(z sigma) ].
inline void hamiltonian_gradient(const ModelSpec& model, double t, ConstVec x, ConstVec y, double yp, ConstVec z,
                                 ConstVec weights, MutVec out, std::vector<double>& jb, std::vector<double>& js,
                                 std::vector<double>& gc) {
  const std::size_t dx = model.dim_x;
  const std::size_t dw = model.dim_w;
  jb.resize(dx * dx);
  js.resize(dx * dw * dx);
  gc.resize(dx);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t a = 0; a < model.n_actions(); ++a) {
    const double wa = weights[a];
    if (wa == 0.0) continue;
    const ConstVec act = model.actions[a];
    model.drift_jacobian(t, x, act, jb);
    model.diffusion_jacobian(t, x, act, js);
    model.cost_gradient(t, x, act, gc);
    for (std::size_t l = 0; l < dx; ++l) {
      double v = yp * gc[l];
      for (std::size_t i = 0; i < dx; ++i) v += y[i] * jb[i * dx + l];
      for (std::size_t i = 0; i < dx; ++i) {
        for (std::size_t j = 0; j < dw; ++j) v += z[j * dx + i] * js[(i * dw + j) * dx + l];
      }
      out[l] += wa * v;
    }
  }
}

inline void hamiltonian_gradient(const ModelSpec& model, double t, ConstVec x, ConstVec y, double yp, ConstVec z,
                                 ConstVec weights, MutVec out) {
  std::vector<double> jb, js, gc;
  hamiltonian_gradient(model, t, x, y, yp, z, weights, out, jb, js, gc);
}

/// Backward regression scheme for dy = -grad_x H dt + z dw,
/// y_T = y'_T grad_x g(x_T), in multi-step form:
///   S_{k+1} = y_T + sum_{j > k} grad_x H_j dt
///   z_k = E[(y_{k+1} - E[S_{k+1} | x_k]) dw_k | x_k] / dt
///   y_k = E[S_{k+1} + grad_x H_k dt | x_k]
/// with grad_x H_k evaluated explicitly at (y_{k+1}, y'_k, z_k, pi_k). Like
/// the direct estimator of y', every y_k is a single projection of a
/// terminal-plus-generator sum, so regression errors do not compound.
inline AdjointProcesses solve_adjoint(const ModelSpec& model, const PathEnsemble& ensemble,
                                      const RiskAdjustment& adjustment, const MeasurePolicy& policy,
                                      const RegressionBasis& basis, const Execution& exec = {}) {
  const std::size_t np = ensemble.n_paths();
  const std::size_t n = ensemble.n_steps();
  const std::size_t dx = model.dim_x;
  const std::size_t dw = model.dim_w;
  const std::size_t na = model.n_actions();
  const double dt = ensemble.grid().dt();
  if (adjustment.n_paths != np || adjustment.n_steps != n) {
    throw Error(Errc::InvalidArgument, "risk adjustment was solved on a different ensemble");
  }
  AdjointProcesses out;
  out.n_paths = np;
  out.n_steps = n;
  out.dim_x = dx;
  out.dim_w = dw;
  out.y.assign(np * (n + 1) * dx, 0.0);
  out.z.assign(np * n * dw * dx, 0.0);
  out.adjustment = adjustment;
  out.residual.assign(n + 1, 0.0);

  std::vector<double> acc(np * dx);  // S, per path and component
  {
    std::vector<double> grad(dx);
    for (std::size_t i = 0; i < np; ++i) {
      model.terminal_gradient(ensemble.state(i, n), grad);
      const double ypT = adjustment.yp_at(i, n);
      double* yT = out.y.data() + (i * (n + 1) + n) * dx;
      for (std::size_t l = 0; l < dx; ++l) {
        yT[l] = ypT * grad[l];
        acc[i * dx + l] = yT[l];
      }
    }
  }

  std::vector<double> target(np), fitted(np), shat(np * dx);
  for (std::size_t k = n; k-- > 0;) {
    const auto states = ensemble.slice(k);
    const LeastSquaresProjector proj(basis, states, dx);
    for (std::size_t l = 0; l < dx; ++l) {
      for (std::size_t i = 0; i < np; ++i) target[i] = acc[i * dx + l];
      proj.fit(target, fitted);
      for (std::size_t i = 0; i < np; ++i) shat[i * dx + l] = fitted[i];
    }
    for (std::size_t j = 0; j < dw; ++j) {
      for (std::size_t l = 0; l < dx; ++l) {
        for (std::size_t i = 0; i < np; ++i) {
          const double incr = out.y[(i * (n + 1) + k + 1) * dx + l] - shat[i * dx + l];
          target[i] = incr * ensemble.dw(i, k)[j] / dt;
        }
        proj.fit(target, fitted);
        for (std::size_t i = 0; i < np; ++i) out.z[((i * n + k) * dw + j) * dx + l] = fitted[i];
      }
    }
    const double t = ensemble.grid().t(k);
    parallel_for(np, exec, [&](std::size_t begin, std::size_t end) {
      std::vector<double> w(na), grad(dx), jb, js, gc;
      for (std::size_t i = begin; i < end; ++i) {
        const ConstVec x = ensemble.state(i, k);
        policy.weights(k, x, w);
        const ConstVec ynext(out.y.data() + (i * (n + 1) + k + 1) * dx, dx);
        const ConstVec zk(out.z.data() + (i * n + k) * dw * dx, dw * dx);
        hamiltonian_gradient(model, t, x, ynext, adjustment.yp_at(i, k), zk, w, grad, jb, js, gc);
        for (std::size_t l = 0; l < dx; ++l) {
          acc[i * dx + l] += grad[l] * dt;
          if (!std::isfinite(acc[i * dx + l])) throw Error(Errc::NumericalBlowup, "non-finite adjoint", k);
        }
      }
    });
    double worst = 0.0;
    for (std::size_t l = 0; l < dx; ++l) {
      for (std::size_t i = 0; i < np; ++i) target[i] = acc[i * dx + l];
      const double res = proj.fit(target, fitted);
      worst = std::max(worst, detail::relative(res, target, proj.weights()));
      for (std::size_t i = 0; i < np; ++i) out.y[(i * (n + 1) + k) * dx + l] = fitted[i];
    }
    out.residual[k] = worst;
  }
  return out;
}

/// Per-step cross-path drift of y' against mean(D).
struct MartingaleStep {
  double mean = 0.0;
  double drift = 0.0;  // |mean_k - mean(D)|
  double se = 0.0;
  bool insufficient = false;  // fewer than two paths: SE undefined
  bool within(double n_se, double floor = 0.0) const { return !insufficient && drift <= n_se * se + floor; }
};

struct MartingaleReport {
  double terminal_mean = 0.0;
  std::vector<MartingaleStep> steps;  // 0..n (step n compares D with itself)
  bool insufficient = false;

  /// True when every step is within `n_se` standard errors, with an absolute
  /// floor of 1e-12 (1 + |mean(D)|) for round-off on deterministic slices.
  bool passes(double n_se = 3.0) const {
    if (insufficient) return false;
    const double floor = 1e-12 * (1.0 + std::abs(terminal_mean));
    for (const auto& s : steps) {
      if (!s.within(n_se, floor)) return false;
    }
    return true;
  }
};

inline MartingaleReport martingale_diagnostics(const RiskAdjustment& ra) {
  const std::size_t np = ra.n_paths;
  const std::size_t n = ra.n_steps;
  MartingaleReport rep;
  rep.insufficient = np < 2;
  std::vector<double> col(np);
  for (std::size_t i = 0; i < np; ++i) col[i] = ra.yp_at(i, n);
  rep.terminal_mean = plain_mean(col);
  rep.steps.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    for (std::size_t i = 0; i < np; ++i) col[i] = ra.yp_at(i, k);
    const MeanStats s = mean_stats(col);
    rep.steps[k].mean = s.mean;
    rep.steps[k].drift = std::abs(s.mean - rep.terminal_mean);
    rep.steps[k].se = s.se;
    rep.steps[k].insufficient = rep.insufficient;
  }
  return rep;
}

}  // namespace riskmp
