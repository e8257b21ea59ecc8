#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "riskmp/errors.hpp"

namespace riskmp {

/// Uniform partition 0 = t_0 < ... < t_n = T.
class TimeGrid {
 public:
  TimeGrid(double horizon, std::size_t n_steps) : horizon_(horizon), n_steps_(n_steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
      throw Error(Errc::NonPositiveHorizon, "horizon must be positive and finite");
    }
    if (n_steps == 0) throw Error(Errc::ZeroSteps, "n_steps must be at least 1");
    dt_ = horizon / static_cast<double>(n_steps);
    nodes_.resize(n_steps + 1);
    for (std::size_t k = 0; k <= n_steps; ++k) {
      nodes_[k] = horizon * static_cast<double>(k) / static_cast<double>(n_steps);
    }
    nodes_.back() = horizon;
  }

  double horizon() const { return horizon_; }
  std::size_t n_steps() const { return n_steps_; }
  double dt() const { return dt_; }
  double t(std::size_t k) const { return nodes_[k]; }
  const std::vector<double>& nodes() const { return nodes_; }

 private:
  double horizon_;
  std::size_t n_steps_;
  double dt_;
  std::vector<double> nodes_;
};

inline TimeGrid build_time_grid(double horizon, std::size_t n_steps) { return TimeGrid(horizon, n_steps); }

}  // namespace riskmp
