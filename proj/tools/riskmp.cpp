#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "experiment.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kConfig = 2;

}  // namespace

int main(int argc, char** argv) {
  using namespace riskmp;
  CLI::App app{"Risk-aware maximum principle solver"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  app.add_option("--config", config_path, "JSON experiment config");
  app.add_option("--out", out_dir, "output directory (overrides output_dir)");
  app.add_option("--seed", seed, "seed override");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  auto* sim = app.add_subcommand("simulate", "forward-simulate the initial policy");
  auto* solve = app.add_subcommand("solve", "run the successive-approximation solver");
  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  auto* report = app.add_subcommand("report", "render plot-ready tables from a solve directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kConfig;
  }

  cli::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) {
      cfg = cli::load_config(config_path);
    } else if (verify->parsed()) {
      cfg = cli::parse_config(cli::json{{"seed", 7}});
    } else {
      std::cerr << "error: --config is required\n\n" << app.help();
      return kConfig;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
  if (seed) cfg.seed = *seed;
  if (threads) cfg.threads = *threads;
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  const std::filesystem::path dir(cfg.output_dir);

  try {
    std::filesystem::create_directories(dir);
    if (sim->parsed()) return cli::run_simulate(cfg, dir);
    if (solve->parsed()) return cli::run_solve(cfg, dir);
    if (verify->parsed()) return cli::run_verify(cfg, dir, true);
    if (report->parsed()) return cli::run_report(cfg, dir);
  } catch (const Error& e) {
    if (e.code() == Errc::ConfigInvalid) {
      std::cerr << "error: " << e.what() << "\n";
      return kConfig;
    }
    std::cerr << "error: " << e.what() << "\n";
    cli::write_error(dir, e, cli::config_hash(cfg), cfg.seed);
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    cli::write_error(dir, Error(Errc::InvalidArgument, e.what()), cli::config_hash(cfg), cfg.seed);
    return kRuntime;
  }
  return kOk;
}
