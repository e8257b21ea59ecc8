#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "riskmp/errors.hpp"
#include "riskmp/regression.hpp"

namespace riskmp {

/// One grid step of a feedback rule. Either state-independent (`fixed`
/// weights over all atoms) or a regression score per active atom, clipped at
/// zero and renormalized.
struct FeedbackStep {
  std::vector<double> fixed;  // nonempty => state-independent weights, length n_actions
  PolynomialFeatures features;
  std::vector<std::size_t> atoms;  // atoms with a fitted score
  Eigen::MatrixXd coef;            // n_terms x atoms.size()
};

namespace detail {

/// Row-major copy of a step's coefficients: atom j occupies [j * n_terms, (j + 1) * n_terms).
inline std::vector<double> flatten_scores(const FeedbackStep& s) {
  const auto nt = static_cast<std::size_t>(s.coef.rows());
  std::vector<double> flat(nt * s.atoms.size());
  for (std::size_t j = 0; j < s.atoms.size(); ++j) {
    for (std::size_t f = 0; f < nt; ++f) {
      flat[j * nt + f] = s.coef(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(j));
    }
  }
  return flat;
}

}  // namespace detail

/// Feedback rule: state -> measure on the action grid, per step.
class FeedbackRule {
 public:
  FeedbackRule(std::size_t n_actions, std::vector<FeedbackStep> steps)
      : n_actions_(n_actions), steps_(std::move(steps)) {
    flat_.reserve(steps_.size());
    for (const auto& s : steps_) flat_.push_back(s.fixed.empty() ? detail::flatten_scores(s) : std::vector<double>{});
  }

  std::size_t n_steps() const { return steps_.size(); }
  std::size_t n_actions() const { return n_actions_; }
  const FeedbackStep& step(std::size_t k) const { return steps_[k]; }

  bool state_independent() const {
    return std::all_of(steps_.begin(), steps_.end(), [](const FeedbackStep& s) { return !s.fixed.empty(); });
  }

  /// Adds `mass * weights(k, x)` to `out`.
  void accumulate(std::size_t k, std::span<const double> x, double mass, std::span<double> out) const {
    const FeedbackStep& s = steps_[k];
    if (!s.fixed.empty()) {
      for (std::size_t a = 0; a < n_actions_; ++a) out[a] += mass * s.fixed[a];
      return;
    }
    const std::size_t nt = s.features.n_terms();
    const std::size_t nj = s.atoms.size();
    double phi_buf[64];
    double score_buf[64];
    std::vector<double> heap;
    double* phi = phi_buf;
    double* score = score_buf;
    if (nt > 64 || nj > 64) {
      heap.resize(nt + nj);
      phi = heap.data();
      score = heap.data() + nt;
    }
    s.features.eval(x, std::span<double>(phi, nt));
    const double* coef = flat_[k].data();
    double total = 0.0;
    std::size_t best = 0;
    double best_raw = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nj; ++j) {
      double v = 0.0;
      for (std::size_t f = 0; f < nt; ++f) v += coef[j * nt + f] * phi[f];
      if (v > best_raw) {
        best_raw = v;
        best = j;
      }
      score[j] = v > 0.0 ? v : 0.0;
      total += score[j];
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
      out[s.atoms[best]] += mass;
      return;
    }
    for (std::size_t j = 0; j < s.atoms.size(); ++j) out[s.atoms[j]] += mass * (score[j] / total);
  }

 private:
  std::size_t n_actions_;
  std::vector<FeedbackStep> steps_;
  std::vector<std::vector<double>> flat_;
};

/// Measure-valued feedback control on a fixed grid and action grid.
///
/// Internally a convex mixture: a state-independent table (already scaled by
/// its mixture mass) plus weighted feedback rules. Convex combination is
/// exact in this representation.
class MeasurePolicy {
 public:
  MeasurePolicy() = default;

  /// State-independent policy from per-step weight vectors.
  static MeasurePolicy constant(std::vector<std::vector<double>> weights) {
    if (weights.empty()) throw Error(Errc::InvalidArgument, "policy needs at least one step");
    const std::size_t na = weights.front().size();
    if (na == 0) throw Error(Errc::InvalidArgument, "policy needs at least one atom");
    for (const auto& w : weights) {
      if (w.size() != na) throw Error(Errc::InvalidArgument, "ragged policy table");
      double s = 0.0;
      for (double v : w) {
        if (!(v >= 0.0)) throw Error(Errc::InvalidArgument, "policy weights must be nonnegative");
        s += v;
      }
      if (std::abs(s - 1.0) > 1e-12) throw Error(Errc::InvalidArgument, "policy weights must sum to one");
    }
    MeasurePolicy p;
    p.n_steps_ = weights.size();
    p.n_actions_ = na;
    p.table_ = std::move(weights);
    p.table_mass_ = 1.0;
    return p;
  }

  static MeasurePolicy dirac(std::size_t n_steps, std::size_t n_actions, std::size_t atom) {
    if (atom >= n_actions) throw Error(Errc::InvalidArgument, "atom index out of range");
    std::vector<double> w(n_actions, 0.0);
    w[atom] = 1.0;
    return constant(std::vector<std::vector<double>>(n_steps, w));
  }

  static MeasurePolicy uniform(std::size_t n_steps, std::size_t n_actions) {
    return constant(std::vector<std::vector<double>>(
        n_steps, std::vector<double>(n_actions, 1.0 / static_cast<double>(n_actions))));
  }

  static MeasurePolicy feedback(std::shared_ptr<const FeedbackRule> rule) {
    MeasurePolicy p;
    p.n_steps_ = rule->n_steps();
    p.n_actions_ = rule->n_actions();
    if (rule->state_independent()) {
      p.table_.resize(p.n_steps_);
      for (std::size_t k = 0; k < p.n_steps_; ++k) p.table_[k] = rule->step(k).fixed;
      p.table_mass_ = 1.0;
      return p;
    }
    p.table_mass_ = 0.0;
    p.rules_.push_back({1.0, std::move(rule)});
    return p;
  }

  std::size_t n_steps() const { return n_steps_; }
  std::size_t n_actions() const { return n_actions_; }
  bool is_constant() const { return rules_.empty(); }
  std::size_t n_feedback_components() const { return rules_.size(); }

  /// Writes the measure pi_k(x) over all atoms into `out` (length n_actions).
  void weights(std::size_t k, std::span<const double> x, std::span<double> out) const {
    if (table_mass_ > 0.0) {
      std::copy(table_[k].begin(), table_[k].end(), out.begin());
    } else {
      std::fill(out.begin(), out.end(), 0.0);
    }
    for (const auto& c : rules_) c.rule->accumulate(k, x, c.mass, out);
  }

  std::vector<double> weights(std::size_t k, std::span<const double> x) const {
    std::vector<double> out(n_actions_);
    weights(k, x, out);
    return out;
  }

  /// Drops feedback components whose mixture mass is below `threshold` and
  /// renormalizes the remainder. Returns the dropped mass.
  double compact(double threshold) {
    double dropped = 0.0;
    std::vector<Component> kept;
    for (auto& c : rules_) {
      if (c.mass < threshold) {
        dropped += c.mass;
      } else {
        kept.push_back(c);
      }
    }
    if (dropped == 0.0) return 0.0;
    const double scale = 1.0 / (1.0 - dropped);
    for (auto& c : kept) c.mass *= scale;
    for (auto& row : table_) {
      for (double& v : row) v *= scale;
    }
    table_mass_ *= scale;
    rules_ = std::move(kept);
    return dropped;
  }

  friend MeasurePolicy convex_combine(const MeasurePolicy& pi, const MeasurePolicy& q, double alpha);

 private:
  struct Component {
    double mass;
    std::shared_ptr<const FeedbackRule> rule;
  };

  std::size_t n_steps_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<std::vector<double>> table_;  // scaled by table_mass_
  double table_mass_ = 0.0;
  std::vector<Component> rules_;
};

/// pi(alpha, q) = (1 - alpha) pi + alpha q, per step and state.
inline MeasurePolicy convex_combine(const MeasurePolicy& pi, const MeasurePolicy& q, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::AlphaOutOfRange, "alpha must lie in [0, 1]");
  if (pi.n_steps_ != q.n_steps_ || pi.n_actions_ != q.n_actions_) {
    throw Error(Errc::IncompatiblePolicies, "policies live on different grids");
  }
  if (alpha == 0.0) return pi;
  if (alpha == 1.0) return q;
  MeasurePolicy out;
  out.n_steps_ = pi.n_steps_;
  out.n_actions_ = pi.n_actions_;
  out.table_mass_ = (1.0 - alpha) * pi.table_mass_ + alpha * q.table_mass_;
  if (out.table_mass_ > 0.0) {
    out.table_.assign(out.n_steps_, std::vector<double>(out.n_actions_, 0.0));
    for (std::size_t k = 0; k < out.n_steps_; ++k) {
      for (std::size_t a = 0; a < out.n_actions_; ++a) {
        const double lhs = pi.table_mass_ > 0.0 ? pi.table_[k][a] : 0.0;
        const double rhs = q.table_mass_ > 0.0 ? q.table_[k][a] : 0.0;
        out.table_[k][a] = (1.0 - alpha) * lhs + alpha * rhs;
      }
    }
  }
  for (const auto& c : pi.rules_) out.rules_.push_back({(1.0 - alpha) * c.mass, c.rule});
  for (const auto& c : q.rules_) out.rules_.push_back({alpha * c.mass, c.rule});
  return out;
}

}  // namespace riskmp
