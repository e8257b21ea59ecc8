#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "riskmp/errors.hpp"
#include "riskmp/numeric.hpp"

namespace riskmp {

/// Polynomial regression basis used for every conditional expectation.
/// `ridge` is the penalty on the non-intercept coefficients in the
/// unweighted-sum scale; when unset it defaults to 1e-8 * n.
struct RegressionBasis {
  std::size_t degree = 3;
  std::optional<double> ridge;

  double ridge_for(std::size_t n) const { return ridge.value_or(1e-8 * static_cast<double>(n)); }
};

/// Total-degree polynomial features of standardized coordinates,
/// u_d = (x_d - center_d) / scale_d. Coordinates with (numerically) zero
/// spread on the fitting sample are dropped, so a degenerate slice falls back
/// to the intercept alone.
class PolynomialFeatures {
 public:
  PolynomialFeatures() = default;

  PolynomialFeatures(std::size_t degree, std::span<const double> states, std::size_t dim_x,
                     std::span<const double> weights)
      : dim_x_(dim_x) {
    const std::size_t n = states.size() / dim_x;
    for (std::size_t d = 0; d < dim_x; ++d) {
      CompensatedSum m;
      for (std::size_t i = 0; i < n; ++i) m.add(weights[i] * states[i * dim_x + d]);
      const double mean = m.value();
      CompensatedSum v;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = states[i * dim_x + d] - mean;
        v.add(weights[i] * e * e);
      }
      const double sd = std::sqrt(std::max(0.0, v.value()));
      if (sd > 1e-12 * (1.0 + std::abs(mean))) {
        active_.push_back(d);
        center_.push_back(mean);
        scale_.push_back(sd);
      }
    }
    build_exponents(degree);
  }

  std::size_t dim_x() const { return dim_x_; }
  bool intercept_only() const { return n_terms_ == 1; }

  /// Writes all features (intercept first) into `out`.
  void eval(std::span<const double> x, std::span<double> out) const {
    out[0] = 1.0;
    if (n_terms_ == 1) return;
    const std::size_t na = active_.size();
    const std::size_t stride = degree_ + 1;
    double pw[kMaxActive * (kMaxDegree + 1)];
    double* pows = stride <= kMaxDegree + 1 ? pw : nullptr;
    std::vector<double> heap;
    if (pows == nullptr) {
      heap.resize(na * stride);
      pows = heap.data();
    }
    for (std::size_t a = 0; a < na; ++a) {
      const double u = (x[active_[a]] - center_[a]) / scale_[a];
      double* row = pows + a * stride;
      row[0] = 1.0;
      for (std::size_t p = 1; p < stride; ++p) row[p] = row[p - 1] * u;
    }
    for (std::size_t f = 1; f < n_terms_; ++f) {
      double v = 1.0;
      const unsigned* e = exponents_.data() + f * na;
      for (std::size_t a = 0; a < na; ++a) v *= pows[a * stride + e[a]];
      out[f] = v;
    }
  }

  /// Number of features including the intercept.
  std::size_t n_terms() const { return n_terms_; }

 private:
  static constexpr std::size_t kMaxActive = 16;
  static constexpr std::size_t kMaxDegree = 8;

  void build_exponents(std::size_t degree) {
    degree_ = degree;
    const std::size_t na = active_.size();
    if (na > kMaxActive) throw Error(Errc::InvalidArgument, "too many state coordinates for the polynomial basis");
    exponents_.clear();
    if (na == 0) {
      n_terms_ = 1;
      return;
    }
    // Enumerate exponent tuples by total degree, then lexicographically.
    std::vector<unsigned> e(na, 0);
    for (std::size_t total = 0; total <= degree; ++total) {
      enumerate(e, 0, total);
    }
    n_terms_ = exponents_.size() / na;
  }

  void enumerate(std::vector<unsigned>& e, std::size_t pos, std::size_t remaining) {
    const std::size_t na = e.size();
    if (pos + 1 == na) {
      e[pos] = static_cast<unsigned>(remaining);
      exponents_.insert(exponents_.end(), e.begin(), e.end());
      return;
    }
    for (std::size_t p = remaining + 1; p-- > 0;) {
      e[pos] = static_cast<unsigned>(p);
      enumerate(e, pos + 1, remaining - p);
    }
  }

  std::size_t dim_x_ = 0;
  std::vector<std::size_t> active_;
  std::vector<double> center_;
  std::vector<double> scale_;
  std::vector<unsigned> exponents_;
  std::size_t n_terms_ = 1;
  std::size_t degree_ = 0;
};

/// Weighted ridge least squares against a fixed design, factored once and
/// reused for any number of targets. Non-intercept columns are centered, so
/// the intercept is never penalized: a constant target is reproduced exactly
/// and the weighted mean of fitted values equals the weighted mean of targets.
class LeastSquaresProjector {
 public:
  LeastSquaresProjector(const RegressionBasis& basis, std::span<const double> states, std::size_t dim_x,
                        std::span<const double> weights = {})
      : n_(states.size() / dim_x) {
    if (n_ == 0) throw Error(Errc::InvalidArgument, "regression needs at least one sample");
    if (weights.empty()) {
      weights_.assign(n_, 1.0 / static_cast<double>(n_));
    } else {
      weights_.assign(weights.begin(), weights.end());
    }
    features_ = PolynomialFeatures(basis.degree, states, dim_x, weights_);
    const std::size_t m = features_.n_terms();
    const std::size_t p = m - 1;
    design_.resize(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(p));
    std::vector<double> phi(m);
    for (std::size_t i = 0; i < n_; ++i) {
      features_.eval(states.subspan(i * dim_x, dim_x), phi);
      for (std::size_t f = 0; f < p; ++f) design_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = phi[f + 1];
    }
    col_mean_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    for (std::size_t f = 0; f < p; ++f) {
      CompensatedSum s;
      for (std::size_t i = 0; i < n_; ++i) s.add(weights_[i] * design_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)));
      col_mean_(static_cast<Eigen::Index>(f)) = s.value();
    }
    for (std::size_t i = 0; i < n_; ++i) design_.row(static_cast<Eigen::Index>(i)) -= col_mean_.transpose();

    if (p == 0) return;
    // Scale weights to the unweighted-sum convention (uniform weights -> X^T X).
    const double nscale = static_cast<double>(n_);
    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < n_; ++i) {
      const auto row = design_.row(static_cast<Eigen::Index>(i));
      normal.noalias() += (nscale * weights_[i]) * row.transpose() * row;
    }
    const double lambda = basis.ridge_for(n_);
    if (lambda < 0.0) throw Error(Errc::InvalidArgument, "ridge must be nonnegative");
    normal.diagonal().array() += lambda;
    ldlt_.compute(normal);
    const auto d = ldlt_.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    const double dmin = d.minCoeff();
    if (ldlt_.info() != Eigen::Success || !(dmax > 0.0) || dmin <= 1e-12 * dmax) {
      throw Error(Errc::RankDeficient, "normal equations are singular for this design");
    }
  }

  std::size_t n_samples() const { return n_; }
  std::size_t n_features() const { return features_.n_terms(); }
  const PolynomialFeatures& features() const { return features_; }
  std::span<const double> weights() const { return weights_; }

  /// Coefficients in feature order (intercept first, uncentered form).
  Eigen::VectorXd coefficients(std::span<const double> targets) const {
    const std::size_t m = features_.n_terms();
    const double ybar = weighted_sum(targets, weights_);
    const Eigen::VectorXd beta = slopes(targets, ybar);
    Eigen::VectorXd coef(static_cast<Eigen::Index>(m));
    coef(0) = m == 1 ? ybar : ybar - col_mean_.dot(beta);
    if (m > 1) coef.tail(static_cast<Eigen::Index>(m - 1)) = beta;
    return coef;
  }

  /// In-sample fitted values for `targets`; returns the weighted residual
  /// RMS sqrt(sum_i w_i r_i^2).
  double fit(std::span<const double> targets, std::span<double> fitted) const {
    const double ybar = weighted_sum(targets, weights_);
    const Eigen::VectorXd beta = slopes(targets, ybar);
    const bool flat = beta.size() == 0 || beta.isZero(0.0);
    CompensatedSum res;
    for (std::size_t i = 0; i < n_; ++i) {
      fitted[i] = flat ? ybar : ybar + design_.row(static_cast<Eigen::Index>(i)).dot(beta);
      const double r = targets[i] - fitted[i];
      res.add(weights_[i] * r * r);
    }
    return std::sqrt(res.value());
  }

 private:
  Eigen::VectorXd slopes(std::span<const double> targets, double ybar) const {
    const auto p = static_cast<Eigen::Index>(features_.n_terms() - 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
    if (p == 0) return rhs;
    const double nscale = static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const double yc = targets[i] - ybar;
      if (yc != 0.0) rhs.noalias() += (nscale * weights_[i] * yc) * design_.row(static_cast<Eigen::Index>(i)).transpose();
    }
    if (rhs.isZero(0.0)) return rhs;
    return ldlt_.solve(rhs);
  }

  std::size_t n_;
  std::vector<double> weights_;
  PolynomialFeatures features_;
  Eigen::MatrixXd design_;  // centered non-intercept columns
  Eigen::VectorXd col_mean_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
};

/// Fitted conditional-expectation estimator x -> E[target | x].
struct ConditionalPredictor {
  PolynomialFeatures features;
  Eigen::VectorXd coef;
  double residual_norm = 0.0;           // weighted RMS residual
  double relative_residual = 0.0;       // residual_norm / weighted RMS of the targets

  double operator()(std::span<const double> x) const {
    std::vector<double> phi(features.n_terms());
    features.eval(x, phi);
    double v = 0.0;
    for (std::size_t f = 0; f < phi.size(); ++f) v += coef(static_cast<Eigen::Index>(f)) * phi[f];
    return v;
  }
};

/// `states` is an (n x dim_x) row-major table, `targets` has length n.
inline ConditionalPredictor fit_conditional(const RegressionBasis& basis, std::span<const double> states,
                                            std::size_t dim_x, std::span<const double> targets,
                                            std::span<const double> weights = {}) {
  if (dim_x == 0 || states.size() % dim_x != 0 || states.size() / dim_x != targets.size()) {
    throw Error(Errc::InvalidArgument, "features and targets disagree in length");
  }
  LeastSquaresProjector proj(basis, states, dim_x, weights);
  ConditionalPredictor out;
  out.features = proj.features();
  out.coef = proj.coefficients(targets);
  std::vector<double> fitted(targets.size());
  out.residual_norm = proj.fit(targets, fitted);
  CompensatedSum sq;
  for (std::size_t i = 0; i < targets.size(); ++i) sq.add(proj.weights()[i] * targets[i] * targets[i]);
  const double scale = std::sqrt(sq.value());
  out.relative_residual = scale > 0.0 ? out.residual_norm / scale : out.residual_norm;
  return out;
}

}  // namespace riskmp
