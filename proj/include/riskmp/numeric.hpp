#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace riskmp {

/// Neumaier-compensated accumulator. All cross-path reductions in the library
/// go through this in path order, so results do not depend on thread count.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double weighted_sum(std::span<const double> values, std::span<const double> weights) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < values.size(); ++i) acc.add(weights[i] * values[i]);
  return acc.value();
}

inline double plain_mean(std::span<const double> values) {
  CompensatedSum acc;
  for (double v : values) acc.add(v);
  return acc.value() / static_cast<double>(values.size());
}

struct MeanStats {
  double mean = 0.0;
  double sd = 0.0;  // unbiased sample standard deviation (0 for n < 2)
  double se = 0.0;  // sd / sqrt(n)
  std::size_t n = 0;
};

inline MeanStats mean_stats(std::span<const double> values) {
  MeanStats s;
  s.n = values.size();
  if (s.n == 0) return s;
  s.mean = plain_mean(values);
  if (s.n < 2) return s;
  CompensatedSum acc;
  for (double v : values) acc.add((v - s.mean) * (v - s.mean));
  s.sd = std::sqrt(acc.value() / static_cast<double>(s.n - 1));
  s.se = s.sd / std::sqrt(static_cast<double>(s.n));
  return s;
}

inline bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace riskmp
