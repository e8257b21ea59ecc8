#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "riskmp/errors.hpp"
#include "riskmp/parallel.hpp"
#include "riskmp/rng.hpp"
#include "riskmp/time_grid.hpp"

namespace riskmp {

/// Brownian increments dw[i, k, j] ~ N(0, dt), path i drawn from stream (seed, i).
class BrownianDriver {
 public:
  BrownianDriver(std::size_t n_paths, std::size_t n_steps, std::size_t dim_w, double dt, std::uint64_t seed,
                 std::vector<double> increments)
      : n_paths_(n_paths), n_steps_(n_steps), dim_w_(dim_w), dt_(dt), seed_(seed), increments_(std::move(increments)) {
    if (increments_.size() != n_paths * n_steps * dim_w) {
      throw Error(Errc::InvalidArgument, "increment array has the wrong shape");
    }
  }

  std::size_t n_paths() const { return n_paths_; }
  std::size_t n_steps() const { return n_steps_; }
  std::size_t dim_w() const { return dim_w_; }
  double dt() const { return dt_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<double>& increments() const { return increments_; }

  std::span<const double> dw(std::size_t path, std::size_t step) const {
    return {increments_.data() + (path * n_steps_ + step) * dim_w_, dim_w_};
  }

  /// Stream used for the initial-law sampler of a path; disjoint from the
  /// increment stream of the same path.
  CounterRng initial_stream(std::size_t path) const { return CounterRng(seed_ ^ 0xA5A5A5A5DEADBEEFULL, path); }

 private:
  std::size_t n_paths_;
  std::size_t n_steps_;
  std::size_t dim_w_;
  double dt_;
  std::uint64_t seed_;
  std::vector<double> increments_;
};

inline std::shared_ptr<const BrownianDriver> sample_brownian(const TimeGrid& grid, std::size_t n_paths,
                                                             std::size_t dim_w, std::uint64_t seed,
                                                             const Execution& exec = {}) {
  if (n_paths == 0) throw Error(Errc::InvalidArgument, "n_paths must be at least 1");
  if (dim_w == 0) throw Error(Errc::InvalidArgument, "dim_w must be at least 1");
  const std::size_t n = grid.n_steps();
  const double scale = std::sqrt(grid.dt());
  std::vector<double> inc(n_paths * n * dim_w);
  parallel_for(n_paths, exec, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const CounterRng rng(seed, i);
      double* out = inc.data() + i * n * dim_w;
      for (std::size_t c = 0; c < n * dim_w; ++c) out[c] = scale * rng.normal(c);
    }
  });
  return std::make_shared<const BrownianDriver>(n_paths, n, dim_w, grid.dt(), seed, std::move(inc));
}

}  // namespace riskmp
