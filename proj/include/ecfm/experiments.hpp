#pragma once

#include "ecfm/basis.hpp"
#include "ecfm/io.hpp"
#include "ecfm/linalg.hpp"
#include "ecfm/operators.hpp"
#include "ecfm/optimize.hpp"
#include "ecfm/pce.hpp"
#include "ecfm/solvers.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ecfm {

enum class ExperimentKind { BurgersInv, BurgersEcfm, KppInv, KppEcfm, BeamEcfm };

const char* to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& name);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::BurgersInv;

  // discretization
  int basis_count = 50;        // N
  int model_count = 0;         // M: source modes (KPP) or stochastic modes (beam)
  int measurement_count = 4;   // C
  int replicates = 0;          // D (beam)
  int time_steps = 100;        // P
  double total_time = 2.0;     // T
  int reference_basis_count = 15;
  double quadrature_scale = 1.0;

  // physics
  std::vector<double> true_eps;
  std::vector<double> measurement_points;  // 1D experiments; empty means i/(C+1)
  double diffusion = 0.5;
  double reaction = 1.0;
  double end_stiffness = 0.0;  // H0
  double load = 100.0;         // p
  double source_amplitude = 100.0;
  double constraint_width = 0.0;  // hat half-width or RBF width; 0 picks the default

  // noise
  double sigma = 0.0;
  std::uint64_t seed = 1;

  // optimizer
  std::vector<double> initial_eps;
  AdamConfig adam;
  NLPOptions nlp;
  NewtonConfig newton;
  double confidence_alpha = 0.05;
  double penalty_weight = 100.0;
  double hessian_step = 1e-3;

  std::string output_dir = "out";
  std::string data_file;  // optional CSV; generated from the config when empty

  static ExperimentConfig defaults(ExperimentKind kind);
  /// Throws SolverError(ConfigError).
  void validate() const;
};

/// Starts from the defaults of "experiment" and applies the remaining keys;
/// unknown keys raise SolverError(ConfigError).
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

struct ExperimentReport {
  std::string experiment;
  std::string status = "ok";
  std::string message;
  std::vector<double> recovered_params;
  std::vector<double> objective_trace;
  std::vector<double> constraint_violation_trace;
  std::vector<double> final_constraint_forces;
  std::map<std::string, double> error_metrics;
  std::map<std::string, double> diagnostics;
  std::optional<double> hessian_condition;
  double wall_time = 0.0;

  // Side tables written next to the JSON report (not serialized into it).
  std::map<std::string, CsvTable> tables;
};

nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);

// ---- Burgers -------------------------------------------------------------

struct BurgersProblem {
  BasisFamily basis;
  DiscreteOperatorSet ops;
  TimeGrid grid;
  Vector theta0;
  std::vector<double> points;
};

BurgersProblem build_burgers(const ExperimentConfig& config);
/// C x (P+1) noise-free measurements at the true parameters.
Matrix generate_burgers_data(const ExperimentConfig& config);
CsvTable burgers_data_table(const ExperimentConfig& config, const Matrix& data);
Matrix burgers_data_from_table(const ExperimentConfig& config, const CsvTable& table);

/// z and its gradient at eps for the standard or constraint-force objective.
ValueAndGradient burgers_objective(const BurgersProblem& problem, const Matrix& data, const Vector& eps, bool ecfm,
                                   const NewtonConfig& newton = {});

ExperimentReport run_burgers_inverse(const ExperimentConfig& config, const Matrix& data);
ExperimentReport run_burgers_ecfm(const ExperimentConfig& config, const Matrix& data);

// ---- Fisher-KPP ------------------------------------------------------------

struct KppProblem {
  BasisFamily basis;
  BasisFamily source_basis;
  BasisFamily constraint_basis;
  DiscreteOperatorSet ops;
  std::vector<Point2> points;
};

struct KppData {
  std::vector<Point2> points;
  Vector clean;   // truth field at the points
  Vector values;  // clean + noise
  Vector truth_theta;
};

KppProblem build_kpp(const ExperimentConfig& config);
/// Indicator source of the truth model.
double kpp_truth_source(const ExperimentConfig& config, Point2 x);
KppData generate_kpp_data(const ExperimentConfig& config);
CsvTable kpp_data_table(const KppData& data);
/// Least-squares warm start (eps, theta) for both Fisher-KPP programs.
std::pair<Vector, Vector> kpp_warm_start(const KppProblem& problem, const Vector& data, const NewtonConfig& newton);

ExperimentReport run_kpp_inverse(const ExperimentConfig& config, const KppData& data);
ExperimentReport run_kpp_ecfm(const ExperimentConfig& config, const KppData& data);

// ---- stochastic beam ---------------------------------------------------------

/// H0 that places the omega = 1 buckling load at `target` for a clamped-sine
/// basis of `basis_count` members.
double calibrate_end_stiffness(int basis_count, double target_critical_load, const AssemblyOptions& options = {});
constexpr double kBeamTargetCriticalLoad = 2.24;

BeamOperatorSet build_beam(const ExperimentConfig& config, int basis_count);
MeasurementReplicates generate_beam_data(const ExperimentConfig& config);
CsvTable beam_data_table(const MeasurementReplicates& data);
MeasurementReplicates beam_data_from_table(const CsvTable& table);

/// Lambda(eps, lambda) with its gradient over x = (eps, lambda).
ValueAndGradient beam_likelihood(const BeamOperatorSet& ops, const StochasticGramian& gram,
                                 const MeasurementReplicates& data, const Vector& x, bool* floored = nullptr);

ExperimentReport run_beam_ecfm(const ExperimentConfig& config, const MeasurementReplicates& data);

// ---- shared tools ------------------------------------------------------------

/// Central second differences with step h_i = step * max(|x_i|, 1),
/// symmetrized; returns max |eig| / min |eig|.
double hessian_condition(const std::function<double(const Vector&)>& objective, const Vector& x, double step = 1e-3);

struct GridAxis {
  double lo = 0.0;
  double hi = 1.0;
  int count = 2;
};
/// Parses "lo1:hi1:n1,lo2:hi2:n2".
std::pair<GridAxis, GridAxis> parse_grid(const std::string& text);

/// Burgers objective on a parameter grid; rows (eps1, eps2, z), with NaN where
/// the forward solve failed.
CsvTable scan_loss_surface(const ExperimentConfig& config, const Matrix& data, const GridAxis& eps1,
                           const GridAxis& eps2, int threads = 0);

/// Runs the configured experiment (generating data when no data file is set).
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Writes report.json, data and side tables to output_dir/<experiment>/<stamp>/.
std::filesystem::path write_report(const ExperimentConfig& config, const ExperimentReport& report);

}  // namespace ecfm
