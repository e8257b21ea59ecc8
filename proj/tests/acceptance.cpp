// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "oracles.hpp"
#include "riskmp/riskmp.hpp"

using namespace riskmp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Outcome guarded(const std::function<Outcome()>& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

// Shared portfolio setup at the default sizes.
constexpr std::size_t kSteps = 50;
constexpr std::size_t kPaths = 20000;
constexpr std::size_t kActions = 31;
constexpr std::uint64_t kSeed = 42;

struct RiskAwareRun {
  PolicyAnalysis analysis;
  double msa_value = 0.0;
  BruteForceResult brute;
};

RiskAwareRun risk_aware_run(const RiskFunction& risk) {
  const PortfolioParams p;
  const auto phi = uniform_phi_grid(p, kActions);
  const ModelSpec m = build_portfolio_model(p, phi);
  const TimeGrid g(p.T, kSteps);
  MsaConfig cfg;
  cfg.exec = Execution{4};
  const auto d = sample_brownian(g, kPaths, 1, kSeed, cfg.exec);
  const auto res = msa_solve(m, risk, MeasurePolicy::dirac(kSteps, kActions, kActions / 2), cfg, d,
                             RegressionBasis{}, g);
  RiskAwareRun out{analyze_policy(m, risk, res.policy, d, g, RegressionBasis{}, cfg.exec), 0.0,
                   brute_force_constant_policy(p, risk, phi, d, g, cfg.exec)};
  out.msa_value = out.analysis.objective;
  return out;
}

double relative_rms(const AdjointProcesses& adj, bool z) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < adj.n_paths; ++i) {
    for (std::size_t k = 0; k < adj.n_steps; ++k) {
      const double a = z ? adj.z_at(i, k)[0] : adj.y_at(i, k)[0];
      const double b = z ? adj.zp_at(i, k) : adj.yp_at(i, k);
      num += (a + b) * (a + b);
      den += b * b;
    }
  }
  return std::sqrt(num / den);
}

std::vector<double> normals(std::uint64_t stream, std::size_t n) {
  const CounterRng rng(2718, stream);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = rng.normal(i);
  return v;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RISKMP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, Outcome>> lines(10);
  std::optional<PolicyAnalysis> neutral;
  std::optional<RiskAwareRun> md, ent;

  lines[0] = {"risk-neutral Merton recovery", guarded([&] {
                const PortfolioParams p;
                const ModelSpec m = build_portfolio_model(p, kActions);
                const TimeGrid g(p.T, kSteps);
                const auto t0 = std::chrono::steady_clock::now();
                const auto d = sample_brownian(g, kPaths, 1, kSeed);
                const auto res = msa_solve(m, RiskFunction::expectation(),
                                           MeasurePolicy::dirac(kSteps, kActions, kActions / 2), MsaConfig{}, d,
                                           RegressionBasis{}, g);
                neutral = analyze_policy(m, RiskFunction::expectation(), res.policy, d, g, RegressionBasis{});
                const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                const auto prof = profile_policy(m, res.policy, neutral->ensemble);
                double worst = 0.0;
                for (double v : prof.mean_action) worst = std::max(worst, std::abs(v - 2.0 / 3.0));
                const auto iota = risk_premium(neutral->adjoints.adjustment, p.sigma);
                double iota_worst = 0.0;
                for (std::size_t k = 0; k < kSteps; ++k) {
                  double s = 0.0;
                  for (std::size_t i = 0; i < kPaths; ++i) s += iota.at(i, k);
                  iota_worst = std::max(iota_worst, std::abs(s / kPaths));
                }
                return Outcome{worst <= 0.05 && iota_worst <= 1e-3 && secs <= 60.0,
                               "max |mean phi - 2/3| " + fmt(worst) + ", max |mean iota| " + fmt(iota_worst) + ", " +
                                   fmt(secs) + " s single-threaded, " + std::to_string(res.report.iterations) +
                                   " iterations"};
              })};

  lines[1] = {"Example 1 reproduction", guarded([] {
                const ModelSpec m = example1_model();
                const TimeGrid g(1.0, kSteps);
                const auto d = sample_brownian(g, 10000, 1, 1);
                const auto mixed = simulate_forward(m, MeasurePolicy::uniform(kSteps, 2), d, g);
                bool zero = true;
                for (std::size_t i = 0; i < 10000; ++i) zero = zero && mixed.state(i, kSteps)[0] == 0.0;
                bool strict = true;
                std::string det;
                for (std::size_t atom : {0u, 1u}) {
                  const auto e = simulate_forward(m, MeasurePolicy::dirac(kSteps, 2, atom), d, g);
                  std::vector<double> sq(10000);
                  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = e.state(i, kSteps)[0] * e.state(i, kSteps)[0];
                  const MeanStats s = mean_stats(sq);
                  strict = strict && std::abs(s.mean - 1.0) <= 3.0 * s.se;
                  det += " atom " + std::to_string(atom) + " E[x_T^2]=" + fmt(s.mean) + " (SE " + fmt(s.se) + ")";
                }
                return Outcome{zero && strict, std::string("mixture x_T == 0: ") + (zero ? "yes" : "no") + ";" + det};
              })};

  lines[2] = {"Example 2 bound", guarded([] {
                bool ok = true;
                std::string det;
                for (double eps : {0.1, 0.05, 0.025}) {
                  const double v = example2_response(eps, 10000, kSteps, 1.0, 2);
                  ok = ok && v <= 4.0 * eps * eps;
                  det += fmt(v) + " <= " + fmt(4.0 * eps * eps) + "; ";
                }
                return Outcome{ok, det};
              })};

  lines[3] = {"L-derivative directional checks", guarded([] {
                const EmpiricalSample s(normals(1, 10000));
                double worst = 0.0;
                for (const auto& r : {RiskFunction::mean_deviation(0.5), RiskFunction::smoothed_semideviation(0.5, 0.1),
                                      RiskFunction::entropic(1.0)}) {
                  for (std::uint64_t t = 0; t < 20; ++t) {
                    const auto dir = detail::unit_direction(2718, 100 + t, 10000);
                    worst = std::max(worst, directional_derivative_check(r, s, dir, 1e-4).abs_error);
                  }
                }
                return Outcome{worst <= 1e-6, "max abs error " + fmt(worst)};
              })};

  lines[4] = {"coherence axioms", guarded([] {
                const std::vector<RiskFunction> all{RiskFunction::mean_deviation(0.5),
                                                    RiskFunction::smoothed_semideviation(0.5, 0.1),
                                                    RiskFunction::entropic(1.0)};
                const auto x = normals(2, 2000);
                const EmpiricalSample s(x);
                double trans = 0.0;
                double homog = 0.0;
                for (double a : {-5.0, 0.3, 12.0}) {
                  std::vector<double> y(x);
                  for (double& v : y) v += a;
                  for (const auto& r : all) trans = std::max(trans, std::abs(evaluate(r, s.with_values(y)) - evaluate(r, s) - a));
                }
                for (double lam : {0.25, 4.0}) {
                  std::vector<double> y(x);
                  for (double& v : y) v *= lam;
                  const auto md = RiskFunction::mean_deviation(0.5);
                  homog = std::max(homog, std::abs(evaluate(md, s.with_values(y)) - lam * evaluate(md, s)));
                }
                double convex = -1e300;
                for (std::uint64_t t = 0; t < 100; ++t) {
                  const auto a = normals(1000 + t, 500);
                  auto b = normals(2000 + t, 500);
                  for (double& v : b) v = 1.5 * v - 0.2;
                  const EmpiricalSample sa(a);
                  for (double al : {0.25, 0.5, 0.75}) {
                    std::vector<double> mix(a.size());
                    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = al * a[i] + (1.0 - al) * b[i];
                    for (const auto& r : all) {
                      convex = std::max(convex, evaluate(r, sa.with_values(mix)) -
                                                    (al * evaluate(r, sa) + (1.0 - al) * evaluate(r, sa.with_values(b))));
                    }
                  }
                }
                bool sandwich = true;
                for (std::uint64_t t = 0; t < 100; ++t) {
                  const EmpiricalSample st(normals(3000 + t, 500));
                  const double gap = evaluate(RiskFunction::smoothed_semideviation(0.5, 0.1), st) -
                                     detail::plain_semideviation(st, 0.5);
                  sandwich = sandwich && gap > 0.0 && gap <= 0.1 * 0.5 * std::log(2.0);
                }
                return Outcome{trans <= 1e-12 && homog <= 1e-12 && convex <= 1e-12 && sandwich,
                               "translation " + fmt(trans) + ", homogeneity " + fmt(homog) + ", convexity slack " +
                                   fmt(convex) + ", sandwich " + (sandwich ? "holds" : "violated")};
              })};

  // Risk-aware solves back criteria 6, 7 and 9.
  const Outcome solve_md = guarded([&] {
    md = risk_aware_run(RiskFunction::mean_deviation(0.5));
    return Outcome{true, ""};
  });
  const Outcome solve_ent = guarded([&] {
    ent = risk_aware_run(RiskFunction::entropic(1.0));
    return Outcome{true, ""};
  });

  lines[5] = {"martingale property of y'", guarded([&] {
                if (!md || !ent || !neutral) return Outcome{false, "solve failed: " + solve_md.detail + solve_ent.detail};
                const bool m1 = martingale_diagnostics(md->analysis.adjoints.adjustment).passes(3.0);
                const bool m2 = martingale_diagnostics(ent->analysis.adjoints.adjustment).passes(3.0);
                double worst = 0.0;
                for (double v : neutral->adjoints.adjustment.yp) worst = std::max(worst, std::abs(v - 1.0));
                for (double v : neutral->adjoints.adjustment.zp) worst = std::max(worst, std::abs(v));
                return Outcome{m1 && m2 && worst <= 1e-8,
                               std::string("mean-deviation ") + (m1 ? "within" : "outside") + " 3 SE, entropic " +
                                   (m2 ? "within" : "outside") + " 3 SE, risk-neutral max |y'-1|,|z'| " + fmt(worst)};
              })};

  lines[6] = {"adjoint identity", guarded([&] {
                if (!md || !ent) return Outcome{false, "solve failed"};
                double worst = 0.0;
                for (const auto* run : {&*md, &*ent}) {
                  worst = std::max({worst, relative_rms(run->analysis.adjoints, false),
                                    relative_rms(run->analysis.adjoints, true)});
                }
                return Outcome{worst <= 1e-2, "max relative error " + fmt(worst)};
              })};

  lines[7] = {"variational linearization", guarded([] {
                const auto r = linearization_ratios({0.2, 0.1, 0.05}, 10000, kSteps, 3);
                return Outcome{r[1] <= r[0] && r[2] <= r[1],
                               "ratios " + fmt(r[0]) + " " + fmt(r[1]) + " " + fmt(r[2])};
              })};

  lines[8] = {"risk-aware optimality vs brute force", guarded([&] {
                if (!md || !ent) return Outcome{false, "solve failed"};
                const PortfolioParams p;
                const auto& bm = md->brute;
                const auto& be = ent->brute;
                const bool ok_md = md->msa_value <= bm.best_value + 2.0 * bm.se[bm.best_index];
                const bool ok_ent = ent->msa_value <= be.best_value + 2.0 * be.se[be.best_index];
                double table = 0.0;
                for (std::size_t a = 0; a < kActions; ++a) {
                  table = std::max(table, std::abs(be.value[a] - oracles::kEntropicTable[a]) / be.se[a]);
                }
                return Outcome{ok_md && ok_ent && table <= 3.0,
                               "mean-deviation " + fmt(md->msa_value) + " vs " + fmt(bm.best_value) + " + 2*" +
                                   fmt(bm.se[bm.best_index]) + "; entropic " + fmt(ent->msa_value) + " vs " +
                                   fmt(be.best_value) + " + 2*" + fmt(be.se[be.best_index]) +
                                   "; closed-form table max " + fmt(table) + " SE"};
              })};

  lines[9] = {"determinism across runs and threads", guarded([] {
                const std::string cfg = std::string(RISKMP_CONFIG_DIR) + "/portfolio_small.json";
                const fs::path base = fs::temp_directory_path() / "riskmp_acceptance";
                fs::remove_all(base);
                const std::vector<std::pair<std::string, int>> runs{{"a", 1}, {"b", 1}, {"c", 4}, {"d", 4}};
                for (const auto& [name, th] : runs) {
                  const int rc = run_cli("solve --config " + cfg + " --threads " + std::to_string(th) + " --out " +
                                         (base / name).string());
                  if (rc != 0) return Outcome{false, "solve exited with " + std::to_string(rc)};
                }
                std::size_t files = 0;
                for (const auto& e : fs::directory_iterator(base / "a")) {
                  ++files;
                  const std::string ref = slurp(e.path());
                  for (const char* other : {"b", "c", "d"}) {
                    if (slurp(base / other / e.path().filename()) != ref) {
                      return Outcome{false, e.path().filename().string() + " differs in run " + other};
                    }
                  }
                }
                return Outcome{files > 0, std::to_string(files) + " files identical over 2 runs x {1, 4} threads"};
              })};

  int failed = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& [name, o] = lines[i];
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, name.c_str(), o.detail.c_str());
    if (!o.pass) ++failed;
  }
  std::fflush(stdout);
  return failed == 0 ? 0 : 1;
}
