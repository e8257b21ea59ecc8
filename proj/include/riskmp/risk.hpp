#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "riskmp/errors.hpp"
#include "riskmp/numeric.hpp"

namespace riskmp {

/// Law-invariant risk functions over empirical cost samples.
struct RiskFunction {
  enum class Kind { Expectation, MeanDeviation, SmoothedSemideviation, Entropic };

  Kind kind = Kind::Expectation;
  double beta = 0.0;     // MeanDeviation, SmoothedSemideviation
  double epsilon = 0.0;  // SmoothedSemideviation
  double theta = 0.0;    // Entropic
  /// Degeneracy threshold for MeanDeviation; <= 0 selects 1e-10 * (1 + |mean|).
  double tol_sigma = 0.0;

  static RiskFunction expectation() { return {}; }
  static RiskFunction mean_deviation(double beta, double tol_sigma = 0.0) {
    require_positive(beta, "beta");
    return {Kind::MeanDeviation, beta, 0.0, 0.0, tol_sigma};
  }
  static RiskFunction smoothed_semideviation(double beta, double epsilon) {
    require_positive(beta, "beta");
    require_positive(epsilon, "epsilon");
    return {Kind::SmoothedSemideviation, beta, epsilon, 0.0, 0.0};
  }
  static RiskFunction entropic(double theta) {
    require_positive(theta, "theta");
    return {Kind::Entropic, 0.0, 0.0, theta, 0.0};
  }

  std::string name() const {
    switch (kind) {
      case Kind::Expectation: return "expectation";
      case Kind::MeanDeviation: return "mean_deviation";
      case Kind::SmoothedSemideviation: return "smoothed_semideviation";
      case Kind::Entropic: return "entropic";
    }
    return "unknown";
  }

 private:
  static void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(Errc::InvalidArgument, std::string(what) + " must be positive");
  }
};

/// Values with probability weights (uniform by default).
class EmpiricalSample {
 public:
  explicit EmpiricalSample(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw Error(Errc::InvalidArgument, "empty sample");
    weights_.assign(values_.size(), 1.0 / static_cast<double>(values_.size()));
  }
  EmpiricalSample(std::vector<double> values, std::vector<double> weights)
      : values_(std::move(values)), weights_(std::move(weights)) {
    if (values_.empty()) throw Error(Errc::InvalidArgument, "empty sample");
    if (weights_.size() != values_.size()) throw Error(Errc::InvalidArgument, "weights and values differ in length");
    CompensatedSum s;
    for (double w : weights_) {
      if (!(w >= 0.0)) throw Error(Errc::InvalidArgument, "weights must be nonnegative");
      s.add(w);
    }
    if (std::abs(s.value() - 1.0) > 1e-12) throw Error(Errc::InvalidArgument, "weights must sum to one");
  }

  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<const double> weights() const { return weights_; }

  EmpiricalSample with_values(std::vector<double> values) const { return EmpiricalSample(std::move(values), weights_); }

 private:
  std::vector<double> values_;
  std::vector<double> weights_;
};

namespace detail {

/// (x)_{eps+} = eps * softplus(x / eps), evaluated without overflow.
inline double smoothed_positive_part(double x, double eps) {
  const double u = x / eps;
  return eps * (std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u))));
}

/// U_eps(x) = 1 / (1 + exp(-x / eps)).
inline double smoothed_step(double x, double eps) {
  const double u = x / eps;
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

inline double weighted_deviation(std::span<const double> v, std::span<const double> w, double mean) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < v.size(); ++i) acc.add(w[i] * (v[i] - mean) * (v[i] - mean));
  return std::sqrt(std::max(0.0, acc.value()));
}

inline double max_value(std::span<const double> v) { return *std::max_element(v.begin(), v.end()); }

}  // namespace detail

inline double evaluate(const RiskFunction& risk, const EmpiricalSample& sample) {
  const auto v = sample.values();
  const auto w = sample.weights();
  const double mean = weighted_sum(v, w);
  switch (risk.kind) {
    case RiskFunction::Kind::Expectation:
      return mean;
    case RiskFunction::Kind::MeanDeviation:
      return mean + risk.beta * detail::weighted_deviation(v, w, mean);
    case RiskFunction::Kind::SmoothedSemideviation: {
      CompensatedSum acc;
      for (std::size_t i = 0; i < v.size(); ++i) acc.add(w[i] * detail::smoothed_positive_part(v[i] - mean, risk.epsilon));
      return mean + risk.beta * acc.value();
    }
    case RiskFunction::Kind::Entropic: {
      const double shift = detail::max_value(v);
      CompensatedSum acc;
      for (std::size_t i = 0; i < v.size(); ++i) acc.add(w[i] * std::exp(risk.theta * (v[i] - shift)));
      return shift + std::log(acc.value()) / risk.theta;
    }
  }
  return mean;
}

/// Per-entry L-derivative D(law)(x_i) at the empirical law.
inline std::vector<double> l_derivative(const RiskFunction& risk, const EmpiricalSample& sample) {
  const auto v = sample.values();
  const auto w = sample.weights();
  const std::size_t n = v.size();
  std::vector<double> d(n, 1.0);
  switch (risk.kind) {
    case RiskFunction::Kind::Expectation:
      break;
    case RiskFunction::Kind::MeanDeviation: {
      const double mean = weighted_sum(v, w);
      const double dev = detail::weighted_deviation(v, w, mean);
      const double tol = risk.tol_sigma > 0.0 ? risk.tol_sigma : 1e-10 * (1.0 + std::abs(mean));
      if (!(dev > tol)) {
        throw Error(Errc::DegenerateSample, "mean-deviation is not differentiable at a (near-)constant sample");
      }
      for (std::size_t i = 0; i < n; ++i) d[i] = 1.0 + risk.beta * (v[i] - mean) / dev;
      break;
    }
    case RiskFunction::Kind::SmoothedSemideviation: {
      const double mean = weighted_sum(v, w);
      std::vector<double> u(n);
      for (std::size_t i = 0; i < n; ++i) u[i] = detail::smoothed_step(v[i] - mean, risk.epsilon);
      const double ubar = weighted_sum(u, w);
      for (std::size_t i = 0; i < n; ++i) d[i] = 1.0 + risk.beta * (u[i] - ubar);
      break;
    }
    case RiskFunction::Kind::Entropic: {
      const double shift = detail::max_value(v);
      std::vector<double> e(n);
      for (std::size_t i = 0; i < n; ++i) e[i] = std::exp(risk.theta * (v[i] - shift));
      const double norm = weighted_sum(e, w);
      for (std::size_t i = 0; i < n; ++i) d[i] = e[i] / norm;
      break;
    }
  }
  return d;
}

/// Monte Carlo standard error of evaluate() from the influence function of
/// the risk functional at the empirical law: sqrt(sum w_i^2 * sum w_i IF_i^2).
inline double standard_error(const RiskFunction& risk, const EmpiricalSample& sample) {
  const auto v = sample.values();
  const auto w = sample.weights();
  const std::size_t n = v.size();
  const double mean = weighted_sum(v, w);
  std::vector<double> infl(n);
  switch (risk.kind) {
    case RiskFunction::Kind::Expectation:
      for (std::size_t i = 0; i < n; ++i) infl[i] = v[i] - mean;
      break;
    case RiskFunction::Kind::MeanDeviation: {
      const double s = detail::weighted_deviation(v, w, mean);
      for (std::size_t i = 0; i < n; ++i) {
        const double c = v[i] - mean;
        infl[i] = c + (s > 0.0 ? risk.beta * (c * c - s * s) / (2.0 * s) : 0.0);
      }
      break;
    }
    case RiskFunction::Kind::SmoothedSemideviation: {
      std::vector<double> f(n), u(n);
      for (std::size_t i = 0; i < n; ++i) {
        f[i] = detail::smoothed_positive_part(v[i] - mean, risk.epsilon);
        u[i] = detail::smoothed_step(v[i] - mean, risk.epsilon);
      }
      const double fbar = weighted_sum(f, w);
      const double ubar = weighted_sum(u, w);
      for (std::size_t i = 0; i < n; ++i) {
        const double c = v[i] - mean;
        infl[i] = c + risk.beta * (f[i] - fbar - ubar * c);
      }
      break;
    }
    case RiskFunction::Kind::Entropic: {
      const double shift = detail::max_value(v);
      std::vector<double> e(n);
      for (std::size_t i = 0; i < n; ++i) e[i] = std::exp(risk.theta * (v[i] - shift));
      const double m = weighted_sum(e, w);
      for (std::size_t i = 0; i < n; ++i) infl[i] = (e[i] - m) / (risk.theta * m);
      break;
    }
  }
  CompensatedSum var;
  CompensatedSum w2;
  for (std::size_t i = 0; i < n; ++i) {
    var.add(w[i] * infl[i] * infl[i]);
    w2.add(w[i] * w[i]);
  }
  return std::sqrt(var.value() * w2.value());
}

struct DirectionalCheck {
  double finite_difference = 0.0;
  double inner_product = 0.0;
  double abs_error = 0.0;
};

/// Central difference of evaluate() along `direction` against <D, direction>_w.
inline DirectionalCheck directional_derivative_check(const RiskFunction& risk, const EmpiricalSample& sample,
                                                     std::span<const double> direction, double h) {
  if (!(h > 0.0)) throw Error(Errc::InvalidArgument, "h must be positive");
  if (direction.size() != sample.size()) throw Error(Errc::InvalidArgument, "direction has the wrong length");
  const auto d = l_derivative(risk, sample);
  const auto v = sample.values();
  std::vector<double> up(v.size()), down(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    up[i] = v[i] + h * direction[i];
    down[i] = v[i] - h * direction[i];
  }
  DirectionalCheck out;
  out.finite_difference =
      (evaluate(risk, sample.with_values(std::move(up))) - evaluate(risk, sample.with_values(std::move(down)))) /
      (2.0 * h);
  CompensatedSum ip;
  for (std::size_t i = 0; i < v.size(); ++i) ip.add(sample.weights()[i] * d[i] * direction[i]);
  out.inner_product = ip.value();
  out.abs_error = std::abs(out.finite_difference - out.inner_product);
  return out;
}

}  // namespace riskmp
