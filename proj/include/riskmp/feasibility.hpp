#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace riskmp {

/// Growth and integrability exponents of a problem. `pbar3` may be +inf
/// (bounded action set).
struct FeasibilityConfig {
  double L = 1.0;
  double pbar1 = 0.0;
  double pbar2 = 0.0;
  double pbar3 = std::numeric_limits<double>::infinity();
  double pbar = 2.0;
  double p1 = 0.0;
  double p2 = 0.0;
  double p1_prime = 0.0;
  double p2_prime = 0.0;
  double p = 1.0;
  bool compact_actions = true;  // a finite action grid is always compact
};

struct FeasibilityCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct FeasibilityReport {
  std::vector<FeasibilityCheck> checks;

  bool feasible() const {
    for (const auto& c : checks) {
      if (!c.pass) return false;
    }
    return true;
  }
  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    for (const auto& c : checks) {
      if (!c.pass) out.push_back(c.name);
    }
    return out;
  }
};

inline FeasibilityReport check_feasibility(const FeasibilityConfig& cfg) {
  FeasibilityReport r;
  auto add = [&](std::string name, bool pass, double lhs, double rhs) {
    std::ostringstream os;
    os.precision(17);
    os << lhs << " vs " << rhs;
    r.checks.push_back({std::move(name), pass, os.str()});
  };
  const bool finite_fields = std::isfinite(cfg.L) && std::isfinite(cfg.pbar1) && std::isfinite(cfg.pbar2) &&
                             std::isfinite(cfg.pbar) && std::isfinite(cfg.p1) && std::isfinite(cfg.p2) &&
                             std::isfinite(cfg.p1_prime) && std::isfinite(cfg.p2_prime) && std::isfinite(cfg.p) &&
                             !std::isnan(cfg.pbar3);
  r.checks.push_back({"fields finite (pbar3 may be inf)", finite_fields, ""});
  add("L > 0", cfg.L > 0.0, cfg.L, 0.0);
  add("0 <= pbar1 <= 1", cfg.pbar1 >= 0.0 && cfg.pbar1 <= 1.0, cfg.pbar1, 1.0);
  add("pbar2 >= 0", cfg.pbar2 >= 0.0, cfg.pbar2, 0.0);
  add("pbar3 > 0", cfg.pbar3 > 0.0, cfg.pbar3, 0.0);
  add("pbar >= 1", cfg.pbar >= 1.0, cfg.pbar, 1.0);
  add("p >= 1", cfg.p >= 1.0, cfg.p, 1.0);
  add("growth exponents >= 0", cfg.p1 >= 0.0 && cfg.p2 >= 0.0 && cfg.p1_prime >= 0.0 && cfg.p2_prime >= 0.0,
      std::min({cfg.p1, cfg.p2, cfg.p1_prime, cfg.p2_prime}), 0.0);
  r.checks.push_back({"pbar3 = inf requires a compact action set",
                      !std::isinf(cfg.pbar3) || cfg.compact_actions, ""});
  add("p < pbar", cfg.p < cfg.pbar, cfg.p, cfg.pbar);
  add("pbar <= pbar3", cfg.pbar <= cfg.pbar3, cfg.pbar, cfg.pbar3);
  add("pbar2 <= pbar3 / pbar", cfg.pbar2 <= cfg.pbar3 / cfg.pbar, cfg.pbar2, cfg.pbar3 / cfg.pbar);
  add("p1' <= p1", cfg.p1_prime <= cfg.p1, cfg.p1_prime, cfg.p1);
  add("p2' <= p2", cfg.p2_prime <= cfg.p2, cfg.p2_prime, cfg.p2);
  add("p1 < pbar / p - 1", cfg.p1 < cfg.pbar / cfg.p - 1.0, cfg.p1, cfg.pbar / cfg.p - 1.0);
  add("p2 < pbar / p - 1", cfg.p2 < cfg.pbar / cfg.p - 1.0, cfg.p2, cfg.pbar / cfg.p - 1.0);
  // Admissibility of the control holds on any finite action grid.
  r.checks.push_back({"controls pbar3-admissible (finite action grid)", cfg.compact_actions, ""});
  return r;
}

}  // namespace riskmp
