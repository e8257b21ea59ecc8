#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "riskmp/adjoint.hpp"
#include "riskmp/brownian.hpp"
#include "riskmp/errors.hpp"
#include "riskmp/model.hpp"
#include "riskmp/numeric.hpp"
#include "riskmp/parallel.hpp"
#include "riskmp/policy.hpp"
#include "riskmp/regression.hpp"
#include "riskmp/risk.hpp"
#include "riskmp/simulate.hpp"
#include "riskmp/time_grid.hpp"

namespace riskmp {

/// Arguments of the Hamiltonian at one (t, x). `z` is dim_w x dim_x
/// row-major, entry (j, i) at j * dim_x + i.
struct HamiltonianContext {
  double t = 0.0;
  ConstVec x;
  ConstVec y;
  double yp = 1.0;
  ConstVec z;
};

namespace detail {

struct HamiltonianScratch {
  std::vector<double> b, s;
  explicit HamiltonianScratch(const ModelSpec& model) : b(model.dim_x), s(model.dim_x * model.dim_w) {}
};

inline double hamiltonian(const HamiltonianContext& ctx, ConstVec action, const ModelSpec& model,
                          HamiltonianScratch& scratch) {
  const std::size_t dx = model.dim_x;
  const std::size_t dw = model.dim_w;
  model.drift(ctx.t, ctx.x, action, scratch.b);
  model.diffusion(ctx.t, ctx.x, action, scratch.s);
  double h = ctx.yp * model.cost(ctx.t, ctx.x, action);
  for (std::size_t i = 0; i < dx; ++i) h += ctx.y[i] * scratch.b[i];
  for (std::size_t j = 0; j < dw; ++j) {
    for (std::size_t i = 0; i < dx; ++i) h += ctx.z[j * dx + i] * scratch.s[i * dw + j];
  }
  return h;
}

inline void hamiltonian_values(const HamiltonianContext& ctx, const ModelSpec& model, MutVec out,
                               HamiltonianScratch& scratch) {
  for (std::size_t a = 0; a < model.n_actions(); ++a) out[a] = hamiltonian(ctx, model.actions[a], model, scratch);
}

}  // namespace detail

/// H = y . b + y' c + tr(z sigma) at a single action.
inline double hamiltonian(const HamiltonianContext& ctx, ConstVec action, const ModelSpec& model) {
  detail::HamiltonianScratch scratch(model);
  return detail::hamiltonian(ctx, action, model, scratch);
}

/// H at every atom of the action grid.
inline void hamiltonian_values(const HamiltonianContext& ctx, const ModelSpec& model, MutVec out) {
  detail::HamiltonianScratch scratch(model);
  detail::hamiltonian_values(ctx, model, out, scratch);
}

/// Integral of H against a measure given by its atom weights.
inline double hamiltonian_measure(const HamiltonianContext& ctx, ConstVec weights, const ModelSpec& model) {
  double h = 0.0;
  for (std::size_t a = 0; a < model.n_actions(); ++a) {
    if (weights[a] != 0.0) h += weights[a] * hamiltonian(ctx, model.actions[a], model);
  }
  return h;
}

/// Uniform mixture over the atoms whose H lies within eta (1 + |H_min|) of
/// the minimum. Writes weights into `out`; returns H_min.
inline double minimize_from_values(ConstVec values, double eta, MutVec out) {
  const double hmin = *std::min_element(values.begin(), values.end());
  const double cut = hmin + eta * (1.0 + std::abs(hmin));
  std::size_t count = 0;
  for (double v : values) count += v <= cut ? 1 : 0;
  const double w = 1.0 / static_cast<double>(count);
  for (std::size_t a = 0; a < values.size(); ++a) out[a] = values[a] <= cut ? w : 0.0;
  return hmin;
}

inline std::vector<double> minimize_hamiltonian(const HamiltonianContext& ctx, const ModelSpec& model,
                                                double eta = 1e-9) {
  if (model.n_actions() == 0) throw Error(Errc::InvalidArgument, "action grid is empty");
  if (!(eta > 0.0)) throw Error(Errc::InvalidArgument, "eta must be positive");
  std::vector<double> values(model.n_actions()), out(model.n_actions());
  hamiltonian_values(ctx, model, values);
  minimize_from_values(values, eta, out);
  return out;
}

struct ObjectiveEstimate {
  double value = 0.0;
  double se = 0.0;
  std::vector<double> costs;
};

/// rho at the empirical total-cost sample of a forward simulation on `driver`.
inline ObjectiveEstimate estimate_objective(const ModelSpec& model, const RiskFunction& risk,
                                            const MeasurePolicy& policy, std::shared_ptr<const BrownianDriver> driver,
                                            const TimeGrid& grid, const Execution& exec = {}) {
  const PathEnsemble ens = simulate_forward(model, policy, std::move(driver), grid, exec);
  ObjectiveEstimate out;
  out.costs = total_cost(ens, model);
  const EmpiricalSample sample(out.costs);
  out.value = evaluate(risk, sample);
  out.se = standard_error(risk, sample);
  return out;
}

inline double objective(const ModelSpec& model, const RiskFunction& risk, const MeasurePolicy& policy,
                        std::shared_ptr<const BrownianDriver> driver, const TimeGrid& grid, const Execution& exec = {}) {
  return estimate_objective(model, risk, policy, std::move(driver), grid, exec).value;
}

/// Forward simulation plus the full backward solve for one policy.
struct PolicyAnalysis {
  PathEnsemble ensemble;
  std::vector<double> costs;
  double objective = 0.0;
  double objective_se = 0.0;
  std::vector<double> derivative;
  AdjointProcesses adjoints;
};

inline PolicyAnalysis analyze_policy(const ModelSpec& model, const RiskFunction& risk, const MeasurePolicy& policy,
                                     std::shared_ptr<const BrownianDriver> driver, const TimeGrid& grid,
                                     const RegressionBasis& basis, const Execution& exec = {}) {
  PathEnsemble ens = simulate_forward(model, policy, std::move(driver), grid, exec);
  std::vector<double> costs = total_cost(ens, model);
  const EmpiricalSample sample(costs);
  const double value = evaluate(risk, sample);
  const double se = standard_error(risk, sample);
  std::vector<double> D = l_derivative(risk, sample);
  const RiskAdjustment ra = solve_risk_adjustment(ens, D, basis);
  AdjointProcesses adj = solve_adjoint(model, ens, ra, policy, basis, exec);
  return PolicyAnalysis{std::move(ens), std::move(costs), value, se, std::move(D), std::move(adj)};
}

/// Per-step summaries of a policy along an ensemble: the path-mean of the
/// measure's mean action (per action coordinate) and the path-mean Shannon
/// entropy of the measure.
struct PolicyProfile {
  std::size_t dim_a = 0;
  std::vector<double> mean_action;  // [step][dim_a]
  std::vector<double> entropy;      // [step]
};

inline PolicyProfile profile_policy(const ModelSpec& model, const MeasurePolicy& policy, const PathEnsemble& ens) {
  const std::size_t n = ens.n_steps();
  const std::size_t np = ens.n_paths();
  const std::size_t na = model.n_actions();
  const std::size_t da = model.dim_a();
  PolicyProfile out;
  out.dim_a = da;
  out.mean_action.assign(n * da, 0.0);
  out.entropy.assign(n, 0.0);
  std::vector<double> w(na);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<CompensatedSum> act(da);
    CompensatedSum ent;
    for (std::size_t i = 0; i < np; ++i) {
      policy.weights(k, ens.state(i, k), w);
      double e = 0.0;
      for (std::size_t a = 0; a < na; ++a) {
        if (w[a] <= 0.0) continue;
        e -= w[a] * std::log(w[a]);
        for (std::size_t d = 0; d < da; ++d) act[d].add(w[a] * model.actions[a][d]);
      }
      ent.add(e);
    }
    for (std::size_t d = 0; d < da; ++d) out.mean_action[k * da + d] = act[d].value() / static_cast<double>(np);
    out.entropy[k] = ent.value() / static_cast<double>(np);
  }
  return out;
}

struct MsaConfig {
  std::size_t max_iters = 50;
  double alpha0 = 0.5;        // alpha_k = alpha0 / (1 + k / alpha_decay)
  double alpha_decay = 10.0;
  double eta = 1e-9;          // tie tolerance, relative to 1 + |H_min|
  double objective_tol = 1e-5;
  double policy_tol = 1e-2;   // mean L1 distance between q* and pi
  double compact_threshold = 1e-4;
  std::uint64_t seed = 0;     // recorded for provenance; the driver is supplied by the caller
  Execution exec;

  double alpha(std::size_t k) const { return alpha0 / (1.0 + static_cast<double>(k) / alpha_decay); }

  void validate() const {
    if (max_iters == 0) throw Error(Errc::InvalidArgument, "max_iters must be positive");
    if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw Error(Errc::AlphaOutOfRange, "alpha0 must lie in (0, 1]");
    if (!(alpha_decay > 0.0)) throw Error(Errc::InvalidArgument, "alpha_decay must be positive");
    if (!(eta > 0.0)) throw Error(Errc::InvalidArgument, "eta must be positive");
    if (!(objective_tol >= 0.0) || !(policy_tol >= 0.0)) throw Error(Errc::InvalidArgument, "tolerances must be nonnegative");
    if (!(compact_threshold >= 0.0 && compact_threshold < 1.0)) {
      throw Error(Errc::InvalidArgument, "compact_threshold must lie in [0, 1)");
    }
  }
};

struct SolveReport {
  std::vector<double> objective;
  std::vector<double> objective_se;
  std::vector<double> hamiltonian_gap;  // mean over (path, step) of int H dpi - min_a H
  std::vector<double> policy_change;    // mean over (path, step) of |q* - pi|_1
  std::vector<double> alpha;
  std::vector<double> adjustment_residual;  // max relative residual of the y' regressions
  std::vector<double> adjoint_residual;     // max relative residual of the y regressions
  std::vector<double> martingale_ratio;     // max over steps of drift / SE (0 when SE = 0 and drift = 0)
  std::vector<double> min_adjustment;       // min over paths and steps of y'
  std::vector<std::size_t> monotonicity_violations;  // iterations whose objective rose beyond 2 SE
  std::size_t iterations = 0;
  std::size_t best_iteration = 0;
  bool converged = false;
  bool max_iters_exceeded = false;
};

namespace detail {

/// Fits q* from per-(path, step) minimizing measures. Steps on which every
/// path selects the same measure become state-independent; otherwise each
/// selected atom's weight is regressed on the step's state features.
inline std::shared_ptr<const FeedbackRule> fit_feedback(const PathEnsemble& ens, std::size_t n_actions,
                                                        const std::vector<double>& minimizers,
                                                        const RegressionBasis& basis) {
  const std::size_t n = ens.n_steps();
  const std::size_t np = ens.n_paths();
  std::vector<FeedbackStep> steps(n);
  std::vector<double> target(np);
  for (std::size_t k = 0; k < n; ++k) {
    auto at = [&](std::size_t i, std::size_t a) { return minimizers[(i * n + k) * n_actions + a]; };
    std::vector<std::size_t> selected;
    bool uniform_across_paths = true;
    for (std::size_t a = 0; a < n_actions; ++a) {
      bool any = false;
      const double first = at(0, a);
      for (std::size_t i = 0; i < np; ++i) {
        const double v = at(i, a);
        any = any || v > 0.0;
        uniform_across_paths = uniform_across_paths && v == first;
      }
      if (any) selected.push_back(a);
    }
    FeedbackStep& st = steps[k];
    if (uniform_across_paths) {
      st.fixed.resize(n_actions);
      for (std::size_t a = 0; a < n_actions; ++a) st.fixed[a] = at(0, a);
      continue;
    }
    const auto states = ens.slice(k);
    const LeastSquaresProjector proj(basis, states, ens.dim_x());
    if (proj.features().intercept_only()) {
      st.fixed.assign(n_actions, 0.0);
      for (std::size_t a : selected) {
        for (std::size_t i = 0; i < np; ++i) target[i] = at(i, a);
        st.fixed[a] = weighted_sum(target, proj.weights());
      }
      double s = 0.0;
      for (double v : st.fixed) s += v;
      for (double& v : st.fixed) v /= s;
      continue;
    }
    st.features = proj.features();
    st.atoms = selected;
    st.coef.resize(static_cast<Eigen::Index>(proj.n_features()), static_cast<Eigen::Index>(selected.size()));
    for (std::size_t j = 0; j < selected.size(); ++j) {
      for (std::size_t i = 0; i < np; ++i) target[i] = at(i, selected[j]);
      st.coef.col(static_cast<Eigen::Index>(j)) = proj.coefficients(target);
    }
  }
  return std::make_shared<const FeedbackRule>(n_actions, std::move(steps));
}

}  // namespace detail

struct MsaResult {
  MeasurePolicy policy;
  SolveReport report;
};

/// Damped method of successive approximations on a frozen driver.
///
/// Each iteration simulates pi, solves (y', z') and (y, z), minimizes H at
/// every (path, step), fits a feedback law q* to the minimizers and moves
/// pi <- (1 - alpha_k) pi + alpha_k q*. Stops when both the objective change
/// and the mean L1 distance |q* - pi| fall under their tolerances; otherwise
/// returns the best iterate after max_iters with `max_iters_exceeded` set.
inline MsaResult msa_solve(const ModelSpec& model, const RiskFunction& risk, const MeasurePolicy& init,
                           const MsaConfig& cfg, std::shared_ptr<const BrownianDriver> driver, const RegressionBasis& basis,
                           const TimeGrid& grid) {
  cfg.validate();
  const std::size_t n = grid.n_steps();
  const std::size_t na = model.n_actions();
  const std::size_t np = driver->n_paths();
  const Execution& exec = cfg.exec;

  MsaResult result;
  SolveReport& rep = result.report;
  MeasurePolicy pi = init;
  MeasurePolicy best = init;
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<double> minimizers(np * n * na), pi_weights(np * n * na);
  std::vector<double> gap(np * n), change(np * n);

  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    const PolicyAnalysis an = analyze_policy(model, risk, pi, driver, grid, basis, exec);
    const AdjointProcesses& adj = an.adjoints;

    rep.objective.push_back(an.objective);
    rep.objective_se.push_back(an.objective_se);
    rep.adjustment_residual.push_back(*std::max_element(adj.adjustment.residual.begin(), adj.adjustment.residual.end()));
    rep.adjoint_residual.push_back(*std::max_element(adj.residual.begin(), adj.residual.end()));
    {
      const MartingaleReport mr = martingale_diagnostics(adj.adjustment);
      double ratio = 0.0;
      for (const auto& s : mr.steps) {
        if (s.se > 0.0) {
          ratio = std::max(ratio, s.drift / s.se);
        } else if (s.drift > 1e-12 * (1.0 + std::abs(mr.terminal_mean))) {
          ratio = std::numeric_limits<double>::infinity();
        }
      }
      rep.martingale_ratio.push_back(ratio);
      rep.min_adjustment.push_back(*std::min_element(adj.adjustment.yp.begin(), adj.adjustment.yp.end()));
    }
    if (it > 0) {
      const double prev = rep.objective[it - 1];
      const double tol = 2.0 * std::max(an.objective_se, rep.objective_se[it - 1]);
      if (an.objective > prev + tol) rep.monotonicity_violations.push_back(it);
    }
    if (an.objective < best_value) {
      best_value = an.objective;
      best = pi;
      rep.best_iteration = it;
    }

    // Pointwise minimization of H and the gap of the current policy.
    parallel_for(np, exec, [&](std::size_t begin, std::size_t end) {
      std::vector<double> values(na), w(na);
      detail::HamiltonianScratch scratch(model);
      for (std::size_t i = begin; i < end; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
          const ConstVec x = an.ensemble.state(i, k);
          const HamiltonianContext ctx{grid.t(k), x, adj.y_at(i, k), adj.yp_at(i, k), adj.z_at(i, k)};
          detail::hamiltonian_values(ctx, model, values, scratch);
          double* m = minimizers.data() + (i * n + k) * na;
          const double hmin = minimize_from_values(values, cfg.eta, MutVec(m, na));
          double* wp = pi_weights.data() + (i * n + k) * na;
          pi.weights(k, x, MutVec(wp, na));
          double h = 0.0;
          for (std::size_t a = 0; a < na; ++a) h += wp[a] * values[a];
          gap[i * n + k] = h - hmin;
        }
      }
    });
    rep.hamiltonian_gap.push_back(plain_mean(gap));

    const auto rule = detail::fit_feedback(an.ensemble, na, minimizers, basis);
    const MeasurePolicy q = MeasurePolicy::feedback(rule);
    parallel_for(np, exec, [&](std::size_t begin, std::size_t end) {
      std::vector<double> wq(na);
      for (std::size_t i = begin; i < end; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
          q.weights(k, an.ensemble.state(i, k), wq);
          const double* wp = pi_weights.data() + (i * n + k) * na;
          double d = 0.0;
          for (std::size_t a = 0; a < na; ++a) d += std::abs(wq[a] - wp[a]);
          change[i * n + k] = d;
        }
      }
    });
    rep.policy_change.push_back(plain_mean(change));
    rep.iterations = it + 1;

    const bool small_step = it > 0 && std::abs(an.objective - rep.objective[it - 1]) <= cfg.objective_tol;
    if (small_step && rep.policy_change.back() <= cfg.policy_tol) {
      rep.converged = true;
      rep.alpha.push_back(0.0);
      result.policy = pi;
      return result;
    }
    const double alpha = cfg.alpha(it);
    rep.alpha.push_back(alpha);
    pi = convex_combine(pi, q, alpha);
    if (cfg.compact_threshold > 0.0) pi.compact(cfg.compact_threshold);
  }
  rep.max_iters_exceeded = true;
  result.policy = best;
  return result;
}

}  // namespace riskmp
