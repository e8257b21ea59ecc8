#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "riskmp/errors.hpp"
#include "riskmp/rng.hpp"

namespace riskmp {

using ConstVec = std::span<const double>;
using MutVec = std::span<double>;

/// Finite action grid A_h; atom `k` is the row `k` of a (size x dim) table.
class ActionGrid {
 public:
  ActionGrid() = default;
  ActionGrid(std::size_t dim, std::vector<double> flat) : dim_(dim), flat_(std::move(flat)) {
    if (dim_ == 0 || flat_.empty() || flat_.size() % dim_ != 0) {
      throw Error(Errc::InvalidArgument, "action grid must be a nonempty (n x dim) table");
    }
  }
  static ActionGrid scalar(std::vector<double> values) { return ActionGrid(1, std::move(values)); }

  std::size_t size() const { return dim_ == 0 ? 0 : flat_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  ConstVec operator[](std::size_t k) const { return {flat_.data() + k * dim_, dim_}; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> flat_;
};

/// Problem data (b, sigma, c, g, nu, A_h) with x-gradients.
///
/// Layouts (row-major):
///   diffusion           dim_x x dim_w, entry (i, j) at i * dim_w + j
///   drift_jacobian      dim_x x dim_x, entry (i, l) = d b_i / d x_l
///   diffusion_jacobian  (dim_x * dim_w) x dim_x, entry ((i * dim_w + j), l) = d sigma_ij / d x_l
///   cost_gradient, terminal_gradient  length dim_x
struct ModelSpec {
  std::size_t dim_x = 1;
  std::size_t dim_w = 1;
  ActionGrid actions;

  std::function<void(double, ConstVec, ConstVec, MutVec)> drift;
  std::function<void(double, ConstVec, ConstVec, MutVec)> diffusion;
  std::function<double(double, ConstVec, ConstVec)> cost;
  std::function<double(ConstVec)> terminal;

  std::function<void(double, ConstVec, ConstVec, MutVec)> drift_jacobian;
  std::function<void(double, ConstVec, ConstVec, MutVec)> diffusion_jacobian;
  std::function<void(double, ConstVec, ConstVec, MutVec)> cost_gradient;
  std::function<void(ConstVec, MutVec)> terminal_gradient;

  /// Sampler for the initial law nu. Receives the path index and a
  /// counter-based stream private to that path.
  std::function<void(std::size_t, const CounterRng&, MutVec)> initial;

  std::size_t dim_a() const { return actions.dim(); }
  std::size_t n_actions() const { return actions.size(); }

  void validate() const {
    if (dim_x == 0 || dim_w == 0) throw Error(Errc::InvalidArgument, "model dimensions must be positive");
    if (actions.size() == 0) throw Error(Errc::InvalidArgument, "action grid is empty");
    if (!drift || !diffusion || !cost || !terminal || !drift_jacobian || !diffusion_jacobian || !cost_gradient ||
        !terminal_gradient || !initial) {
      throw Error(Errc::InvalidArgument, "model is missing a coefficient map");
    }
  }
};

/// Deterministic initial law nu = delta_{x0}.
inline std::function<void(std::size_t, const CounterRng&, MutVec)> point_mass(std::vector<double> x0) {
  return [x0 = std::move(x0)](std::size_t, const CounterRng&, MutVec out) {
    std::copy(x0.begin(), x0.end(), out.begin());
  };
}

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t probes = 0;
  bool passed(double tol = 1e-5) const { return max_relative_error <= tol; }
};

/// Compares every gradient map with central differences of its coefficient
/// at random probe points (t, x, atom). The error of each entry is measured
/// relative to max(1, |analytic|).
inline GradientCheckReport check_model_gradients(const ModelSpec& model, std::size_t n_probes, std::uint64_t seed,
                                                 double horizon = 1.0, double x_scale = 1.0, double h = 1e-6) {
  model.validate();
  const std::size_t dx = model.dim_x;
  const std::size_t dw = model.dim_w;
  const CounterRng rng(seed, 0x6772616400ULL);
  GradientCheckReport report;
  std::vector<double> x(dx), xp(dx), xm(dx);
  std::vector<double> jb(dx * dx), js(dx * dw * dx), gc(dx), gg(dx);
  std::vector<double> bp(dx), bm(dx), sp(dx * dw), sm(dx * dw);
  std::uint64_t ctr = 0;
  auto rel = [](double fd, double an) { return std::abs(fd - an) / std::max(1.0, std::abs(an)); };
  for (std::size_t p = 0; p < n_probes; ++p) {
    const double t = horizon * rng.uniform(ctr++);
    for (auto& v : x) v = x_scale * (2.0 * rng.uniform(ctr++) - 1.0);
    const auto atom = static_cast<std::size_t>(rng.uniform(ctr++) * static_cast<double>(model.n_actions()));
    const ConstVec a = model.actions[std::min(atom, model.n_actions() - 1)];
    model.drift_jacobian(t, x, a, jb);
    model.diffusion_jacobian(t, x, a, js);
    model.cost_gradient(t, x, a, gc);
    model.terminal_gradient(x, gg);
    for (std::size_t l = 0; l < dx; ++l) {
      xp = x;
      xm = x;
      xp[l] += h;
      xm[l] -= h;
      model.drift(t, xp, a, bp);
      model.drift(t, xm, a, bm);
      for (std::size_t i = 0; i < dx; ++i) {
        report.max_relative_error = std::max(report.max_relative_error, rel((bp[i] - bm[i]) / (2 * h), jb[i * dx + l]));
      }
      model.diffusion(t, xp, a, sp);
      model.diffusion(t, xm, a, sm);
      for (std::size_t ij = 0; ij < dx * dw; ++ij) {
        report.max_relative_error =
            std::max(report.max_relative_error, rel((sp[ij] - sm[ij]) / (2 * h), js[ij * dx + l]));
      }
      const double dc = (model.cost(t, xp, a) - model.cost(t, xm, a)) / (2 * h);
      report.max_relative_error = std::max(report.max_relative_error, rel(dc, gc[l]));
      const double dg = (model.terminal(xp) - model.terminal(xm)) / (2 * h);
      report.max_relative_error = std::max(report.max_relative_error, rel(dg, gg[l]));
    }
    ++report.probes;
  }
  return report;
}

}  // namespace riskmp
