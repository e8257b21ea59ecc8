#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "riskmp/errors.hpp"
#include "riskmp/model.hpp"

namespace riskmp {

/// A = {-1, +1}, b = 0, sigma = a, c = 0, g = x^2 / 2, nu = delta_0.
/// Under the half/half mixture the averaged diffusion vanishes.
inline ModelSpec example1_model() {
  ModelSpec m;
  m.actions = ActionGrid::scalar({-1.0, 1.0});
  m.drift = [](double, ConstVec, ConstVec, MutVec out) { out[0] = 0.0; };
  m.diffusion = [](double, ConstVec, ConstVec a, MutVec out) { out[0] = a[0]; };
  m.cost = [](double, ConstVec, ConstVec) { return 0.0; };
  m.terminal = [](ConstVec x) { return 0.5 * x[0] * x[0]; };
  m.drift_jacobian = [](double, ConstVec, ConstVec, MutVec out) { out[0] = 0.0; };
  m.diffusion_jacobian = [](double, ConstVec, ConstVec, MutVec out) { out[0] = 0.0; };
  m.cost_gradient = [](double, ConstVec, ConstVec, MutVec out) { out[0] = 0.0; };
  m.terminal_gradient = [](ConstVec x, MutVec out) { out[0] = x[0]; };
  m.initial = point_mass({0.0});
  return m;
}

/// A = {0, 1}, b = 0, sigma = a, c = 0, g = x^2, nu = delta_0.
inline ModelSpec example2_model() {
  ModelSpec m = example1_model();
  m.actions = ActionGrid::scalar({0.0, 1.0});
  m.terminal = [](ConstVec x) { return x[0] * x[0]; };
  m.terminal_gradient = [](ConstVec x, MutVec out) { out[0] = 2.0 * x[0]; };
  return m;
}

/// Scalar model whose coefficients are affine in x per atom:
///   b = b0[a] + b1[a] x,  sigma = s0[a] + s1[a] x,  c = c0[a] + c1[a] x,
///   g = g1 x + g2 x^2 / 2,  nu = delta_{x0}.
struct CoefficientTable {
  std::vector<double> actions;
  std::vector<double> b0, b1, s0, s1, c0, c1;
  double g1 = 0.0;
  double g2 = 0.0;
  double x0 = 0.0;

  void validate() const {
    const std::size_t n = actions.size();
    if (n == 0) throw Error(Errc::InvalidArgument, "coefficient table has no actions");
    for (const auto* v : {&b0, &b1, &s0, &s1, &c0, &c1}) {
      if (v->size() != n) throw Error(Errc::InvalidArgument, "coefficient columns must match the action count");
      for (double e : *v) {
        if (!std::isfinite(e)) throw Error(Errc::InvalidArgument, "coefficient table entries must be finite");
      }
    }
    if (!std::isfinite(g1) || !std::isfinite(g2) || !std::isfinite(x0)) {
      throw Error(Errc::InvalidArgument, "terminal coefficients must be finite");
    }
  }
};

inline ModelSpec table_model(const CoefficientTable& table) {
  table.validate();
  ModelSpec m;
  m.actions = ActionGrid::scalar(table.actions);
  // Atoms are looked up by value; the grid holds distinct entries in order.
  auto index = [acts = table.actions](double a) {
    for (std::size_t k = 0; k < acts.size(); ++k) {
      if (acts[k] == a) return k;
    }
    throw Error(Errc::InvalidArgument, "action is not on the grid");
  };
  const CoefficientTable t = table;
  m.drift = [t, index](double, ConstVec x, ConstVec a, MutVec out) {
    const auto k = index(a[0]);
    out[0] = t.b0[k] + t.b1[k] * x[0];
  };
  m.diffusion = [t, index](double, ConstVec x, ConstVec a, MutVec out) {
    const auto k = index(a[0]);
    out[0] = t.s0[k] + t.s1[k] * x[0];
  };
  m.cost = [t, index](double, ConstVec x, ConstVec a) {
    const auto k = index(a[0]);
    return t.c0[k] + t.c1[k] * x[0];
  };
  m.terminal = [t](ConstVec x) { return t.g1 * x[0] + 0.5 * t.g2 * x[0] * x[0]; };
  m.drift_jacobian = [t, index](double, ConstVec, ConstVec a, MutVec out) { out[0] = t.b1[index(a[0])]; };
  m.diffusion_jacobian = [t, index](double, ConstVec, ConstVec a, MutVec out) { out[0] = t.s1[index(a[0])]; };
  m.cost_gradient = [t, index](double, ConstVec, ConstVec a, MutVec out) { out[0] = t.c1[index(a[0])]; };
  m.terminal_gradient = [t](ConstVec x, MutVec out) { out[0] = t.g1 + t.g2 * x[0]; };
  m.initial = point_mass({t.x0});
  return m;
}

/// b = x + a, sigma = 0.1, c = x, g = 0, nu = delta_0, A = {0, 1}.
inline ModelSpec linear_test_model() {
  CoefficientTable t;
  t.actions = {0.0, 1.0};
  t.b0 = {0.0, 1.0};
  t.b1 = {1.0, 1.0};
  t.s0 = {0.1, 0.1};
  t.s1 = {0.0, 0.0};
  t.c0 = {0.0, 0.0};
  t.c1 = {1.0, 1.0};
  return table_model(t);
}

/// b = a sin x, sigma = 0.3 a cos x, c = x^2 / 2, g = x^2 / 2, A = {0.5, 1.5},
/// nu = delta_{0.3}. Nonlinear in x, so the state response to a mixture
/// perturbation has a genuine second-order part.
inline ModelSpec nonlinear_test_model() {
  ModelSpec m;
  m.actions = ActionGrid::scalar({0.5, 1.5});
  m.drift = [](double, ConstVec x, ConstVec a, MutVec out) { out[0] = a[0] * std::sin(x[0]); };
  m.diffusion = [](double, ConstVec x, ConstVec a, MutVec out) { out[0] = 0.3 * a[0] * std::cos(x[0]); };
  m.cost = [](double, ConstVec x, ConstVec) { return 0.5 * x[0] * x[0]; };
  m.terminal = [](ConstVec x) { return 0.5 * x[0] * x[0]; };
  m.drift_jacobian = [](double, ConstVec x, ConstVec a, MutVec out) { out[0] = a[0] * std::cos(x[0]); };
  m.diffusion_jacobian = [](double, ConstVec x, ConstVec a, MutVec out) { out[0] = -0.3 * a[0] * std::sin(x[0]); };
  m.cost_gradient = [](double, ConstVec x, ConstVec, MutVec out) { out[0] = x[0]; };
  m.terminal_gradient = [](ConstVec x, MutVec out) { out[0] = x[0]; };
  m.initial = point_mass({0.3});
  return m;
}

}  // namespace riskmp
