// Batch driver: run experiments, scan loss surfaces, generate data, verify.
#include "ecfm/experiments.hpp"
#include "ecfm/verify.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitInfeasible = 4;

int exit_code_for(const std::string& status) {
  if (status == "ok") return kExitOk;
  if (status == "infeasible") return kExitInfeasible;
  return kExitSolver;
}

ecfm::Matrix burgers_data(const ecfm::ExperimentConfig& cfg) {
  return cfg.data_file.empty() ? ecfm::generate_burgers_data(cfg)
                               : ecfm::burgers_data_from_table(cfg, ecfm::read_csv(cfg.data_file));
}

int cmd_run(const std::string& path) {
  const auto cfg = ecfm::load_config(path);
  const auto report = ecfm::run_experiment(cfg);
  const auto dir = ecfm::write_report(cfg, report);
  std::cout << report.experiment << ": " << report.status;
  if (!report.message.empty()) std::cout << " (" << report.message << ")";
  std::cout << "\nreport: " << dir.string() << "\n";
  return exit_code_for(report.status);
}

int cmd_scan(const std::string& path, const std::string& grid, int threads) {
  const auto cfg = ecfm::load_config(path);
  const auto [ax1, ax2] = ecfm::parse_grid(grid);
  const auto data = burgers_data(cfg);
  ecfm::ExperimentReport report;
  report.experiment = ecfm::to_string(cfg.experiment);
  report.status = "ok";
  report.tables["surface"] = ecfm::scan_loss_surface(cfg, data, ax1, ax2, threads);
  const auto& rows = report.tables["surface"].rows;
  Eigen::Index best = -1;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    if (std::isfinite(rows(i, 2)) && (best < 0 || rows(i, 2) < rows(best, 2))) best = i;
  }
  if (best >= 0) {
    report.diagnostics["argmin_eps1"] = rows(best, 0);
    report.diagnostics["argmin_eps2"] = rows(best, 1);
    report.diagnostics["min_value"] = rows(best, 2);
  }
  report.diagnostics["failed_points"] = static_cast<double>((rows.col(2).array() != rows.col(2).array()).count());
  const auto dir = ecfm::write_report(cfg, report);
  std::cout << "surface: " << (dir / "surface.csv").string() << "\n";
  return kExitOk;
}

int cmd_gen_data(const std::string& path, const std::string& out) {
  const auto cfg = ecfm::load_config(path);
  ecfm::CsvTable table;
  switch (cfg.experiment) {
    case ecfm::ExperimentKind::BurgersInv:
    case ecfm::ExperimentKind::BurgersEcfm:
      table = ecfm::burgers_data_table(cfg, ecfm::generate_burgers_data(cfg));
      break;
    case ecfm::ExperimentKind::KppInv:
    case ecfm::ExperimentKind::KppEcfm:
      table = ecfm::kpp_data_table(ecfm::generate_kpp_data(cfg));
      break;
    case ecfm::ExperimentKind::BeamEcfm:
      table = ecfm::beam_data_table(ecfm::generate_beam_data(cfg));
      break;
  }
  const std::filesystem::path target =
      out.empty() ? std::filesystem::path(cfg.output_dir) / ecfm::to_string(cfg.experiment) / "data.csv" : std::filesystem::path(out);
  ecfm::write_csv(target, table);
  std::cout << "data: " << target.string() << "\n";
  return kExitOk;
}

int cmd_verify() {
  int failed = 0;
  for (const auto& r : ecfm::run_invariant_checks()) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    failed += r.passed ? 0 : 1;
  }
  return failed == 0 ? kExitOk : kExitSolver;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ECFM and standard inverse problem experiments"};
  app.require_subcommand(1);

  std::string config;
  std::string grid;
  std::string out;
  int threads = 0;

  auto* run = app.add_subcommand("run", "run an experiment and write its report");
  run->add_option("config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);

  auto* scan = app.add_subcommand("scan", "evaluate a Burgers objective on a parameter grid");
  scan->add_option("config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  scan->add_option("--grid", grid, "lo:hi:n,lo:hi:n over (eps1, eps2)")->required();
  scan->add_option("--threads", threads, "worker threads (0 = hardware)");

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic measurements for a config");
  gen->add_option("config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out, "output CSV path");

  auto* verify = app.add_subcommand("verify", "run the invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config);
    if (*scan) return cmd_scan(config, grid, threads);
    if (*gen) return cmd_gen_data(config, out);
    if (*verify) return cmd_verify();
  } catch (const ecfm::SolverError& e) {
    std::cerr << "error (" << ecfm::to_string(e.kind()) << "): " << e.what() << "\n";
    switch (e.kind()) {
      case ecfm::ErrorKind::ConfigError:
      case ecfm::ErrorKind::InvalidArgument:
        return kExitConfig;
      case ecfm::ErrorKind::Infeasible:
        return kExitInfeasible;
      default:
        return kExitSolver;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitConfig;
}
