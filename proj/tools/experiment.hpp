#pragma once

// Config ingestion and command bodies for the riskmp executable.

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskmp/riskmp.hpp"

namespace riskmp::cli {

using json = nlohmann::json;

struct ExperimentConfig {
  std::string problem = "portfolio";  // portfolio | example1 | example2 | custom
  PortfolioParams portfolio;
  CoefficientTable custom;
  std::string risk_kind = "expectation";
  double beta = 0.5;
  double epsilon = 0.1;
  double theta = 1.0;
  double horizon = 1.0;
  std::size_t n_steps = 50;
  std::size_t n_paths = 20000;
  std::size_t n_actions = 31;
  std::size_t basis_degree = 3;
  std::optional<double> ridge;
  MsaConfig msa;
  std::string init = "dirac_mid";  // dirac_mid | uniform | dirac:<index>
  FeasibilityConfig feasibility;
  std::size_t verify_paths = 4000;
  std::size_t verify_steps = 25;
  std::uint64_t seed = 0;
  std::string output_dir = "riskmp_out";
  std::size_t threads = 1;

  RiskFunction risk() const {
    if (risk_kind == "expectation") return RiskFunction::expectation();
    if (risk_kind == "mean_deviation") return RiskFunction::mean_deviation(beta);
    if (risk_kind == "smoothed_semideviation") return RiskFunction::smoothed_semideviation(beta, epsilon);
    if (risk_kind == "entropic") return RiskFunction::entropic(theta);
    throw Error(Errc::ConfigInvalid, "unknown risk kind '" + risk_kind + "'");
  }

  RegressionBasis basis() const {
    RegressionBasis b;
    b.degree = basis_degree;
    b.ridge = ridge;
    return b;
  }

  ModelSpec model() const {
    if (problem == "portfolio") return build_portfolio_model(portfolio, n_actions);
    if (problem == "example1") return example1_model();
    if (problem == "example2") return example2_model();
    return table_model(custom);
  }

  double T() const { return problem == "portfolio" ? portfolio.T : horizon; }
  Execution exec() const { return Execution{threads}; }
};

// ---------------------------------------------------------------- parsing

namespace detail {

inline void reject_unknown(const json& obj, const std::vector<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw Error(Errc::ConfigInvalid, "unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::ConfigInvalid, std::string("wrong type for '") + key + "' in " + where);
  }
}

inline const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  if (!root.contains(key)) return empty;
  if (!root.at(key).is_object()) throw Error(Errc::ConfigInvalid, std::string("'") + key + "' must be an object");
  return root.at(key);
}

}  // namespace detail

/// Parses and validates a config document. Every problem is reported as
/// ConfigInvalid.
inline ExperimentConfig parse_config(const json& root) {
  using detail::read;
  if (!root.is_object()) throw Error(Errc::ConfigInvalid, "config must be a JSON object");
  detail::reject_unknown(root,
                         {"problem", "portfolio", "custom", "risk", "grid", "msa", "init", "feasibility", "verify",
                          "seed", "output_dir", "threads"},
                         "config");
  ExperimentConfig c;
  if (!root.contains("seed")) throw Error(Errc::ConfigInvalid, "seed is required");
  read(root, "seed", c.seed, "config");
  read(root, "problem", c.problem, "config");
  read(root, "init", c.init, "config");
  read(root, "output_dir", c.output_dir, "config");
  read(root, "threads", c.threads, "config");
  if (c.problem != "portfolio" && c.problem != "example1" && c.problem != "example2" && c.problem != "custom") {
    throw Error(Errc::ConfigInvalid, "unknown problem '" + c.problem + "'");
  }

  const json& pf = detail::section(root, "portfolio");
  detail::reject_unknown(pf, {"r", "mu", "sigma", "phi_low", "phi_high", "x0", "T", "allow_zero_lower"}, "portfolio");
  read(pf, "r", c.portfolio.r, "portfolio");
  read(pf, "mu", c.portfolio.mu, "portfolio");
  read(pf, "sigma", c.portfolio.sigma, "portfolio");
  read(pf, "phi_low", c.portfolio.phi_low, "portfolio");
  read(pf, "phi_high", c.portfolio.phi_high, "portfolio");
  read(pf, "x0", c.portfolio.x0, "portfolio");
  read(pf, "T", c.portfolio.T, "portfolio");
  read(pf, "allow_zero_lower", c.portfolio.allow_zero_lower, "portfolio");

  const json& cu = detail::section(root, "custom");
  detail::reject_unknown(cu, {"actions", "b0", "b1", "s0", "s1", "c0", "c1", "g1", "g2", "x0"}, "custom");
  read(cu, "actions", c.custom.actions, "custom");
  read(cu, "b0", c.custom.b0, "custom");
  read(cu, "b1", c.custom.b1, "custom");
  read(cu, "s0", c.custom.s0, "custom");
  read(cu, "s1", c.custom.s1, "custom");
  read(cu, "c0", c.custom.c0, "custom");
  read(cu, "c1", c.custom.c1, "custom");
  read(cu, "g1", c.custom.g1, "custom");
  read(cu, "g2", c.custom.g2, "custom");
  read(cu, "x0", c.custom.x0, "custom");

  const json& rk = detail::section(root, "risk");
  detail::reject_unknown(rk, {"kind", "beta", "epsilon", "theta"}, "risk");
  read(rk, "kind", c.risk_kind, "risk");
  read(rk, "beta", c.beta, "risk");
  read(rk, "epsilon", c.epsilon, "risk");
  read(rk, "theta", c.theta, "risk");

  const json& gr = detail::section(root, "grid");
  detail::reject_unknown(gr, {"horizon", "n_steps", "n_paths", "n_actions", "basis_degree", "ridge"}, "grid");
  read(gr, "horizon", c.horizon, "grid");
  read(gr, "n_steps", c.n_steps, "grid");
  read(gr, "n_paths", c.n_paths, "grid");
  read(gr, "n_actions", c.n_actions, "grid");
  read(gr, "basis_degree", c.basis_degree, "grid");
  if (gr.contains("ridge")) {
    double r = 0.0;
    read(gr, "ridge", r, "grid");
    c.ridge = r;
  }
  if (c.problem == "portfolio" && gr.contains("horizon")) {
    throw Error(Errc::ConfigInvalid, "the portfolio horizon is portfolio.T, not grid.horizon");
  }

  const json& ms = detail::section(root, "msa");
  detail::reject_unknown(ms,
                         {"max_iters", "alpha0", "alpha_decay", "eta", "objective_tol", "policy_tol",
                          "compact_threshold"},
                         "msa");
  read(ms, "max_iters", c.msa.max_iters, "msa");
  read(ms, "alpha0", c.msa.alpha0, "msa");
  read(ms, "alpha_decay", c.msa.alpha_decay, "msa");
  read(ms, "eta", c.msa.eta, "msa");
  read(ms, "objective_tol", c.msa.objective_tol, "msa");
  read(ms, "policy_tol", c.msa.policy_tol, "msa");
  read(ms, "compact_threshold", c.msa.compact_threshold, "msa");

  if (c.problem == "portfolio") {
    c.feasibility = portfolio_feasibility();
  } else {
    c.feasibility.pbar = 8.0;
    c.feasibility.p = 2.0;
    c.feasibility.p1 = 1.0;
    c.feasibility.p2 = 1.0;
  }
  const json& fe = detail::section(root, "feasibility");
  detail::reject_unknown(fe, {"L", "pbar1", "pbar2", "pbar3", "pbar", "p1", "p2", "p1_prime", "p2_prime", "p"},
                         "feasibility");
  read(fe, "L", c.feasibility.L, "feasibility");
  read(fe, "pbar1", c.feasibility.pbar1, "feasibility");
  read(fe, "pbar2", c.feasibility.pbar2, "feasibility");
  if (fe.contains("pbar3") && fe.at("pbar3").is_string() && fe.at("pbar3").get<std::string>() == "inf") {
    c.feasibility.pbar3 = std::numeric_limits<double>::infinity();
  } else {
    read(fe, "pbar3", c.feasibility.pbar3, "feasibility");
  }
  read(fe, "pbar", c.feasibility.pbar, "feasibility");
  read(fe, "p1", c.feasibility.p1, "feasibility");
  read(fe, "p2", c.feasibility.p2, "feasibility");
  read(fe, "p1_prime", c.feasibility.p1_prime, "feasibility");
  read(fe, "p2_prime", c.feasibility.p2_prime, "feasibility");
  read(fe, "p", c.feasibility.p, "feasibility");

  const json& ve = detail::section(root, "verify");
  detail::reject_unknown(ve, {"n_paths", "n_steps"}, "verify");
  read(ve, "n_paths", c.verify_paths, "verify");
  read(ve, "n_steps", c.verify_steps, "verify");

  // Semantic validation; library errors become config errors here.
  try {
    if (c.problem == "portfolio") c.portfolio.validate();
    if (c.problem == "custom") c.custom.validate();
    (void)c.risk();
    c.msa.validate();
    (void)TimeGrid(c.T(), c.n_steps);
  } catch (const Error& e) {
    throw Error(Errc::ConfigInvalid, e.what());
  }
  if (c.n_paths < 2) throw Error(Errc::ConfigInvalid, "n_paths must be at least 2");
  if (c.problem == "portfolio" && c.n_actions < 2) throw Error(Errc::ConfigInvalid, "n_actions must be at least 2");
  if (c.basis_degree > 8) throw Error(Errc::ConfigInvalid, "basis_degree must be at most 8");
  if (c.threads == 0) throw Error(Errc::ConfigInvalid, "threads must be positive");
  if (c.verify_paths < 2 || c.verify_steps == 0) throw Error(Errc::ConfigInvalid, "verify sizes are too small");
  if (c.init != "dirac_mid" && c.init != "uniform" && c.init.rfind("dirac:", 0) != 0) {
    throw Error(Errc::ConfigInvalid, "init must be dirac_mid, uniform or dirac:<index>");
  }
  const FeasibilityReport fr = check_feasibility(c.feasibility);
  if (!fr.feasible()) {
    std::string msg = "infeasible exponents:";
    for (const auto& v : fr.violations()) msg += " [" + v + "]";
    throw Error(Errc::ConfigInvalid, msg);
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigInvalid, "cannot open config '" + path + "'");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ConfigInvalid, std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(root);
}

/// Resolved config minus run-local fields (output_dir, threads).
inline json canonical(const ExperimentConfig& c) {
  json j;
  j["problem"] = c.problem;
  if (c.problem == "portfolio") {
    const auto& p = c.portfolio;
    j["portfolio"] = {{"r", p.r},         {"mu", p.mu}, {"sigma", p.sigma}, {"phi_low", p.phi_low},
                      {"phi_high", p.phi_high}, {"x0", p.x0}, {"T", p.T},         {"allow_zero_lower", p.allow_zero_lower}};
    j["n_actions"] = c.n_actions;
  } else {
    j["horizon"] = c.horizon;
  }
  if (c.problem == "custom") {
    const auto& t = c.custom;
    j["custom"] = {{"actions", t.actions}, {"b0", t.b0}, {"b1", t.b1}, {"s0", t.s0}, {"s1", t.s1},
                   {"c0", t.c0},           {"c1", t.c1}, {"g1", t.g1}, {"g2", t.g2}, {"x0", t.x0}};
  }
  j["risk"] = {{"kind", c.risk_kind}, {"beta", c.beta}, {"epsilon", c.epsilon}, {"theta", c.theta}};
  j["grid"] = {{"n_steps", c.n_steps}, {"n_paths", c.n_paths}, {"basis_degree", c.basis_degree}};
  if (c.ridge) j["grid"]["ridge"] = *c.ridge;
  j["msa"] = {{"max_iters", c.msa.max_iters},         {"alpha0", c.msa.alpha0},
              {"alpha_decay", c.msa.alpha_decay},     {"eta", c.msa.eta},
              {"objective_tol", c.msa.objective_tol}, {"policy_tol", c.msa.policy_tol},
              {"compact_threshold", c.msa.compact_threshold}};
  j["init"] = c.init;
  const auto& f = c.feasibility;
  j["feasibility"] = {{"L", f.L},   {"pbar1", f.pbar1}, {"pbar2", f.pbar2},       {"pbar", f.pbar},
                      {"p1", f.p1}, {"p2", f.p2},       {"p1_prime", f.p1_prime}, {"p2_prime", f.p2_prime},
                      {"p", f.p},   {"pbar3", std::isinf(f.pbar3) ? json("inf") : json(f.pbar3)}};
  j["verify"] = {{"n_paths", c.verify_paths}, {"n_steps", c.verify_steps}};
  j["seed"] = c.seed;
  return j;
}

/// FNV-1a 64 of the canonical dump, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string s = canonical(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

// ---------------------------------------------------------------- output

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& hash, std::uint64_t seed,
            const std::vector<std::string>& columns)
      : out_(path, std::ios::binary) {
    if (!out_) throw Error(Errc::InvalidArgument, "cannot write '" + path.string() + "'");
    out_ << "# config_hash=" << hash << " seed=" << seed << "\n";
    row(columns);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << field(cells[i]);
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

struct CsvTable {
  std::string hash;
  std::uint64_t seed = 0;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return i;
    }
    throw Error(Errc::InvalidArgument, "missing column '" + name + "'");
  }
};

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::InvalidArgument, "cannot read '" + path.string() + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# config_hash=", 0) != 0) {
    throw Error(Errc::HashMismatch, "'" + path.string() + "' has no config_hash header");
  }
  std::istringstream hdr(line.substr(2));
  std::string kv;
  while (hdr >> kv) {
    if (kv.rfind("config_hash=", 0) == 0) t.hash = kv.substr(12);
    if (kv.rfind("seed=", 0) == 0) t.seed = std::stoull(kv.substr(5));
  }
  if (std::getline(in, line)) t.columns = split_csv(line);
  while (std::getline(in, line)) {
    if (!line.empty()) t.rows.push_back(split_csv(line));
  }
  return t;
}

inline void write_error(const std::filesystem::path& dir, const Error& e, const std::string& hash, std::uint64_t seed) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  json j;
  j["code"] = std::string(errc_name(e.code()));
  j["message"] = e.what();
  j["step"] = e.step() ? json(*e.step()) : json(nullptr);
  j["config_hash"] = hash;
  j["seed"] = seed;
  std::ofstream(dir / "error.json") << j.dump(2) << "\n";
}

// ---------------------------------------------------------------- commands

inline MeasurePolicy initial_policy(const ExperimentConfig& c, std::size_t n_actions) {
  if (c.init == "uniform") return MeasurePolicy::uniform(c.n_steps, n_actions);
  std::size_t atom = n_actions / 2;
  if (c.init != "dirac_mid") {
    try {
      atom = std::stoul(c.init.substr(6));
    } catch (const std::exception&) {
      throw Error(Errc::ConfigInvalid, "bad dirac index in init");
    }
    if (atom >= n_actions) throw Error(Errc::ConfigInvalid, "dirac index is off the action grid");
  }
  return MeasurePolicy::dirac(c.n_steps, n_actions, atom);
}

inline double quantile(std::vector<double> v, double q) {
  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

inline void write_ensemble_summary(const std::filesystem::path& path, const std::string& hash, std::uint64_t seed,
                                   const PathEnsemble& ens) {
  CsvWriter w(path, hash, seed, {"step", "t", "mean_x", "sd_x", "min_x", "max_x", "mean_running_cost"});
  std::vector<double> col(ens.n_paths());
  std::vector<double> run(ens.n_paths());
  for (std::size_t k = 0; k <= ens.n_steps(); ++k) {
    for (std::size_t i = 0; i < ens.n_paths(); ++i) {
      col[i] = ens.state(i, k)[0];
      run[i] = ens.running_cost(i, k);
    }
    const MeanStats s = mean_stats(col);
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    w.row({std::to_string(k), num(ens.grid().t(k)), num(s.mean), num(s.sd), num(*lo), num(*hi), num(plain_mean(run))});
  }
}

inline int run_simulate(const ExperimentConfig& c, const std::filesystem::path& dir) {
  const std::string hash = config_hash(c);
  const ModelSpec model = c.model();
  const TimeGrid grid(c.T(), c.n_steps);
  const auto driver = sample_brownian(grid, c.n_paths, model.dim_w, c.seed, c.exec());
  const MeasurePolicy pol = initial_policy(c, model.n_actions());
  const PathEnsemble ens = simulate_forward(model, pol, driver, grid, c.exec());
  write_ensemble_summary(dir / "simulate_paths.csv", hash, c.seed, ens);

  const std::vector<double> costs = total_cost(ens, model);
  const EmpiricalSample sample(costs);
  const MeanStats s = mean_stats(costs);
  CsvWriter w(dir / "simulate_costs.csv", hash, c.seed, {"statistic", "value"});
  w.row({"objective", num(evaluate(c.risk(), sample))});
  w.row({"objective_se", num(standard_error(c.risk(), sample))});
  w.row({"cost_mean", num(s.mean)});
  w.row({"cost_sd", num(s.sd)});
  w.row({"cost_q05", num(quantile(costs, 0.05))});
  w.row({"cost_q50", num(quantile(costs, 0.5))});
  w.row({"cost_q95", num(quantile(costs, 0.95))});
  return 0;
}

inline int run_solve(const ExperimentConfig& c, const std::filesystem::path& dir) {
  const std::string hash = config_hash(c);
  const ModelSpec model = c.model();
  const RiskFunction risk = c.risk();
  const TimeGrid grid(c.T(), c.n_steps);
  const Execution exec = c.exec();
  const auto driver = sample_brownian(grid, c.n_paths, model.dim_w, c.seed, exec);
  MsaConfig msa = c.msa;
  msa.seed = c.seed;
  msa.exec = exec;
  const MsaResult res = msa_solve(model, risk, initial_policy(c, model.n_actions()), msa, driver, c.basis(), grid);
  const SolveReport& rep = res.report;

  {
    CsvWriter w(dir / "solve_trace.csv", hash, c.seed,
                {"iteration", "objective", "objective_se", "hamiltonian_gap", "policy_change", "alpha",
                 "adjustment_residual", "adjoint_residual", "martingale_ratio", "min_adjustment"});
    for (std::size_t k = 0; k < rep.objective.size(); ++k) {
      w.row({std::to_string(k), num(rep.objective[k]), num(rep.objective_se[k]), num(rep.hamiltonian_gap[k]),
             num(rep.policy_change[k]), num(rep.alpha[k]), num(rep.adjustment_residual[k]),
             num(rep.adjoint_residual[k]), num(rep.martingale_ratio[k]), num(rep.min_adjustment[k])});
    }
  }

  const PolicyAnalysis an = analyze_policy(model, risk, res.policy, driver, grid, c.basis(), exec);
  const PolicyProfile prof = profile_policy(model, res.policy, an.ensemble);
  const std::size_t n = grid.n_steps();
  const std::size_t np = an.ensemble.n_paths();
  const std::size_t na = model.n_actions();
  {
    CsvWriter w(dir / "solve_policy.csv", hash, c.seed, {"step", "t", "mean_action", "entropy"});
    for (std::size_t k = 0; k < n; ++k) {
      w.row({std::to_string(k), num(grid.t(k)), num(prof.mean_action[k * prof.dim_a]), num(prof.entropy[k])});
    }
  }
  {
    std::vector<std::string> cols{"step", "t"};
    for (std::size_t a = 0; a < na; ++a) cols.push_back("w_" + num(model.actions[a][0]));
    CsvWriter w(dir / "solve_policy_weights.csv", hash, c.seed, cols);
    std::vector<double> wt(na);
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<CompensatedSum> acc(na);
      for (std::size_t i = 0; i < np; ++i) {
        res.policy.weights(k, an.ensemble.state(i, k), wt);
        for (std::size_t a = 0; a < na; ++a) acc[a].add(wt[a]);
      }
      std::vector<std::string> r{std::to_string(k), num(grid.t(k))};
      for (std::size_t a = 0; a < na; ++a) r.push_back(num(acc[a].value() / static_cast<double>(np)));
      w.row(r);
    }
  }

  const AdjointProcesses& adj = an.adjoints;
  const MartingaleReport mart = martingale_diagnostics(adj.adjustment);
  {
    CsvWriter w(dir / "solve_adjoint.csv", hash, c.seed,
                {"step", "t", "mean_y", "mean_yp", "mean_z", "mean_zp", "rms_y", "rms_yp", "rms_z", "rms_zp",
                 "martingale_drift", "martingale_se"});
    auto rms = [](const std::vector<double>& v) {
      CompensatedSum s;
      for (double e : v) s.add(e * e);
      return std::sqrt(s.value() / static_cast<double>(v.size()));
    };
    std::vector<double> y(np), yp(np), z(np), zp(np);
    for (std::size_t k = 0; k <= n; ++k) {
      for (std::size_t i = 0; i < np; ++i) {
        y[i] = adj.y_at(i, k)[0];
        yp[i] = adj.yp_at(i, k);
        z[i] = k < n ? adj.z_at(i, k)[0] : 0.0;
        zp[i] = k < n ? adj.zp_at(i, k) : 0.0;
      }
      const auto& ms = mart.steps[k];
      w.row({std::to_string(k), num(grid.t(k)), num(plain_mean(y)), num(plain_mean(yp)),
             k < n ? num(plain_mean(z)) : "", k < n ? num(plain_mean(zp)) : "", num(rms(y)), num(rms(yp)),
             k < n ? num(rms(z)) : "", k < n ? num(rms(zp)) : "", num(ms.drift), num(ms.se)});
    }
  }

  bool premium = false;
  if (c.problem == "portfolio") {
    try {
      const RiskPremiumPath iota = risk_premium(adj.adjustment, c.portfolio.sigma);
      const auto phi = optimal_allocation_from_adjoints(adj.adjustment, c.portfolio);
      CsvWriter w(dir / "solve_premium.csv", hash, c.seed,
                  {"step", "t", "iota_mean", "iota_sd", "iota_q05", "iota_q95", "phi_from_adjoints"});
      std::vector<double> col(np), ph(np);
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < np; ++i) {
          col[i] = iota.at(i, k);
          ph[i] = phi[i * n + k];
        }
        const MeanStats s = mean_stats(col);
        w.row({std::to_string(k), num(grid.t(k)), num(s.mean), num(s.sd), num(quantile(col, 0.05)),
               num(quantile(col, 0.95)), num(plain_mean(ph))});
      }
      premium = true;
    } catch (const Error& e) {
      if (e.code() != Errc::NonPositiveAdjustment) throw;
    }
  }

  {
    CsvWriter w(dir / "solve_checks.csv", hash, c.seed, {"check", "pass", "detail"});
    for (const auto& fc : check_feasibility(c.feasibility).checks) w.row({"feasibility: " + fc.name, fc.pass ? "1" : "0", fc.detail});
    w.row({"martingale within 3 SE", mart.passes(3.0) ? "1" : "0", mart.insufficient ? "insufficient sample" : ""});
    const double ent = *std::max_element(prof.entropy.begin(), prof.entropy.end());
    w.row({"policy near-Dirac (max entropy <= " + num(kNearDiracEntropy) + ")", ent <= kNearDiracEntropy ? "1" : "0",
           num(ent)});
    w.row({"hamiltonian gap <= 1e-3", rep.hamiltonian_gap.back() <= 1e-3 ? "1" : "0", num(rep.hamiltonian_gap.back())});
    if (c.problem == "portfolio") {
      CompensatedSum ey, ny, ez, nz;
      for (std::size_t i = 0; i < np; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
          const double a = adj.y_at(i, k)[0] + adj.yp_at(i, k);
          const double b = adj.z_at(i, k)[0] + adj.zp_at(i, k);
          ey.add(a * a);
          ny.add(adj.yp_at(i, k) * adj.yp_at(i, k));
          ez.add(b * b);
          nz.add(adj.zp_at(i, k) * adj.zp_at(i, k));
        }
      }
      const double ry = std::sqrt(ey.value() / ny.value());
      const double rz = nz.value() > 0.0 ? std::sqrt(ez.value() / nz.value()) : std::sqrt(ez.value());
      w.row({"adjoint identity y = -y'", ry <= 1e-2 ? "1" : "0", num(ry)});
      w.row({"adjoint identity z = -z'", rz <= 1e-2 ? "1" : "0", num(rz)});
    }
  }

  {
    CsvWriter w(dir / "solve_summary.csv", hash, c.seed, {"key", "value"});
    w.row({"objective", num(an.objective)});
    w.row({"objective_se", num(an.objective_se)});
    w.row({"iterations", std::to_string(rep.iterations)});
    w.row({"best_iteration", std::to_string(rep.best_iteration)});
    w.row({"converged", rep.converged ? "1" : "0"});
    w.row({"max_iters_exceeded", rep.max_iters_exceeded ? "1" : "0"});
    w.row({"monotonicity_violations", std::to_string(rep.monotonicity_violations.size())});
    w.row({"feedback_components", std::to_string(res.policy.n_feedback_components())});
    w.row({"premium_available", premium ? "1" : "0"});
    if (c.problem == "portfolio") w.row({"merton_allocation", num(merton_allocation(c.portfolio))});
  }
  return 0;
}

inline int run_verify(const ExperimentConfig& c, const std::filesystem::path& dir, bool echo) {
  VerifyOptions opt;
  opt.seed = c.seed;
  opt.n_paths = c.verify_paths;
  opt.n_steps = c.verify_steps;
  opt.exec = c.exec();
  const auto results = run_invariant_suite(opt);
  CsvWriter w(dir / "verify_invariants.csv", config_hash(c), c.seed, {"module", "invariant", "pass", "detail"});
  std::size_t failed = 0;
  for (const auto& r : results) {
    w.row({r.module, r.name, r.pass ? "1" : "0", r.detail});
    if (!r.pass) ++failed;
    if (echo) std::printf("%-4s  %-10s %-52s %s\n", r.pass ? "PASS" : "FAIL", r.module.c_str(), r.name.c_str(), r.detail.c_str());
  }
  if (echo) std::printf("%zu/%zu invariants passed\n", results.size() - failed, results.size());
  return failed == 0 ? 0 : 1;
}

/// Plot-ready tables from a solve directory; every input must carry this
/// config's hash.
inline int run_report(const ExperimentConfig& c, const std::filesystem::path& dir) {
  const std::string hash = config_hash(c);
  auto load = [&](const char* name) {
    CsvTable t = read_csv(dir / name);
    if (t.hash != hash || t.seed != c.seed) {
      throw Error(Errc::HashMismatch, std::string(name) + " was produced by config " + t.hash + " seed " +
                                          std::to_string(t.seed) + ", expected " + hash + " seed " +
                                          std::to_string(c.seed));
    }
    return t;
  };
  const CsvTable trace = load("solve_trace.csv");
  const CsvTable policy = load("solve_policy.csv");
  std::optional<CsvTable> premium;
  if (std::filesystem::exists(dir / "solve_premium.csv")) premium = load("solve_premium.csv");

  {
    CsvWriter w(dir / "report_objective.csv", hash, c.seed,
                {"iteration", "objective", "band_low", "band_high", "hamiltonian_gap", "policy_change"});
    const std::size_t io = trace.col("objective"), is = trace.col("objective_se"), ig = trace.col("hamiltonian_gap"),
                      ic = trace.col("policy_change");
    for (const auto& r : trace.rows) {
      const double v = std::stod(r[io]);
      const double se = std::stod(r[is]);
      w.row({r[0], r[io], num(v - 2.0 * se), num(v + 2.0 * se), r[ig], r[ic]});
    }
  }
  {
    const bool ref = c.problem == "portfolio";
    std::vector<std::string> cols{"step", "t", "mean_action"};
    if (ref) {
      cols.push_back("merton");
      cols.push_back("deviation");
    }
    CsvWriter w(dir / "report_policy.csv", hash, c.seed, cols);
    const std::size_t ia = policy.col("mean_action");
    for (const auto& r : policy.rows) {
      std::vector<std::string> out{r[0], r[1], r[ia]};
      if (ref) {
        const double m = merton_allocation(c.portfolio);
        out.push_back(num(m));
        out.push_back(num(std::stod(r[ia]) - m));
      }
      w.row(out);
    }
  }
  if (premium) {
    CsvWriter w(dir / "report_iota.csv", hash, c.seed, {"step", "t", "iota_mean", "band_low", "band_high"});
    const std::size_t im = premium->col("iota_mean"), lo = premium->col("iota_q05"), hi = premium->col("iota_q95");
    for (const auto& r : premium->rows) w.row({r[0], r[1], r[im], r[lo], r[hi]});
  }
  return 0;
}

}  // namespace riskmp::cli
