#include "ecfm/experiments.hpp"

#include "ecfm/io.hpp"
#include "ecfm/sensitivity.hpp"
#include "ecfm/stats.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

namespace ecfm {

using nlohmann::json;

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::BurgersInv: return "burgers_inv";
    case ExperimentKind::BurgersEcfm: return "burgers_ecfm";
    case ExperimentKind::KppInv: return "kpp_inv";
    case ExperimentKind::KppEcfm: return "kpp_ecfm";
    case ExperimentKind::BeamEcfm: return "beam_ecfm";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (auto k : {ExperimentKind::BurgersInv, ExperimentKind::BurgersEcfm, ExperimentKind::KppInv,
                 ExperimentKind::KppEcfm, ExperimentKind::BeamEcfm}) {
    if (name == to_string(k)) return k;
  }
  throw SolverError(ErrorKind::ConfigError, "unknown experiment '" + name + "'");
}

namespace {

bool is_burgers(ExperimentKind k) { return k == ExperimentKind::BurgersInv || k == ExperimentKind::BurgersEcfm; }
bool is_kpp(ExperimentKind k) { return k == ExperimentKind::KppInv || k == ExperimentKind::KppEcfm; }

int exact_sqrt(int n) {
  int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  return r * r == n ? r : -1;
}

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }
std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::vector<double> uniform_interior(int count) {
  std::vector<double> pts;
  for (int i = 1; i <= count; ++i) pts.push_back(static_cast<double>(i) / (count + 1));
  return pts;
}

// 400-point midpoint grid on [0,1].
std::vector<double> line_grid(int count = 400) {
  std::vector<double> x;
  for (int k = 0; k < count; ++k) x.push_back((k + 0.5) / count);
  return x;
}

Matrix tabulate_basis(const BasisFamily& basis, const std::vector<double>& xs) {
  Matrix t(static_cast<Eigen::Index>(xs.size()), basis.count());
  for (size_t q = 0; q < xs.size(); ++q) {
    for (int i = 1; i <= basis.count(); ++i) t(static_cast<Eigen::Index>(q), i - 1) = eval_basis(basis, i, xs[q]);
  }
  return t;
}

// Separable evaluation of a tensor-sine field on a g x g midpoint grid;
// entry (a, b) is at (x_a, x_b).
Matrix tensor_field(const BasisFamily& basis, const Vector& coeffs, int g) {
  const int n = basis.per_axis();
  const std::vector<double> xs = line_grid(g);
  const Matrix s = tabulate_basis(BasisFamily::sine_1d(n), xs);  // g x n
  Matrix c(n, n);
  for (int k = 1; k <= basis.count(); ++k) {
    const auto [a, b] = basis.tensor_mode(k);
    c(a - 1, b - 1) = coeffs(k - 1);
  }
  return s * c * s.transpose();
}

double relative_l1(const Matrix& truth, const Matrix& approx) {
  const double denom = truth.cwiseAbs().sum();
  if (!(denom > 0.0)) throw SolverError(ErrorKind::InvalidArgument, "reference field is identically zero");
  return (truth - approx).cwiseAbs().sum() / denom;
}

template <typename T>
void read_key(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) {
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
      throw SolverError(ErrorKind::ConfigError, std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw SolverError(ErrorKind::ConfigError, where + " must be an object");
  std::set<std::string> names(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!names.count(it.key())) {
      throw SolverError(ErrorKind::ConfigError, "unknown key '" + it.key() + "' in " + where);
    }
  }
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void apply_opt_status(ExperimentReport& report, const OptResult& res) {
  switch (res.status) {
    case OptStatus::Converged: report.status = "ok"; break;
    case OptStatus::Infeasible: report.status = "infeasible"; break;
    case OptStatus::SolverFailure:
    case OptStatus::NonFiniteGradient:
    case OptStatus::LinearAlgebraFailure: report.status = "solver_failure"; break;
    default: report.status = "not_converged"; break;
  }
  report.message = res.message;
  report.objective_trace = res.objective_trace;
  report.constraint_violation_trace = res.constraint_violation_trace;
  report.diagnostics["optimizer_iterations"] = res.iterations;
  if (res.eq_multipliers.size() + res.ineq_multipliers.size() > 0 || res.stationarity > 0.0) {
    report.diagnostics["kkt_stationarity"] = res.stationarity;
    report.diagnostics["kkt_feasibility"] = res.feasibility;
    report.diagnostics["kkt_complementarity"] = res.complementarity;
  }
}

CsvTable trace_table(const ExperimentReport& r) {
  CsvTable t;
  t.header = {"iteration", "objective", "constraint_violation"};
  t.rows.resize(static_cast<Eigen::Index>(r.objective_trace.size()), 3);
  for (size_t k = 0; k < r.objective_trace.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    t.rows(i, 0) = static_cast<double>(k);
    t.rows(i, 1) = r.objective_trace[k];
    t.rows(i, 2) = k < r.constraint_violation_trace.size() ? r.constraint_violation_trace[k] : 0.0;
  }
  return t;
}

}  // namespace

// ---- config ---------------------------------------------------------------

ExperimentConfig ExperimentConfig::defaults(ExperimentKind kind) {
  ExperimentConfig c;
  c.experiment = kind;
  if (is_burgers(kind)) {
    c.basis_count = 50;
    c.measurement_count = 4;
    c.time_steps = 100;
    c.total_time = 2.0;
    c.true_eps = {1.75, 1.0};
    c.initial_eps = {1.0, 0.5};
    c.sigma = 0.0;
  } else if (is_kpp(kind)) {
    c.basis_count = 100;
    c.model_count = 16;
    c.measurement_count = 225;
    c.constraint_width = 500.0;
    c.sigma = 0.05;
    c.seed = 1;
    c.nlp.max_iters = 300;
  } else {
    c.basis_count = 6;
    c.model_count = 6;
    c.measurement_count = 5;
    c.replicates = 25;
    c.reference_basis_count = 15;
    c.true_eps = {1.0};
    c.initial_eps = {0.5};
    c.load = 100.0;
    c.seed = 1;
    c.nlp.max_iters = 500;
  }
  return c;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw SolverError(ErrorKind::ConfigError, m); };
  if (basis_count < 1 || measurement_count < 1 || time_steps < 1 || reference_basis_count < 1) {
    fail("counts must be positive");
  }
  if (!(total_time > 0.0) || !(quadrature_scale > 0.0)) fail("T and quadrature_scale must be positive");
  if (!(sigma >= 0.0)) fail("sigma must be non-negative");
  if (!(constraint_width >= 0.0)) fail("constraint_width must be non-negative");
  if (!measurement_points.empty()) {
    if (static_cast<int>(measurement_points.size()) != measurement_count) fail("measurement_points must have C entries");
    for (double x : measurement_points) {
      if (!(x > 0.0 && x < 1.0)) fail("measurement points must lie in (0, 1)");
    }
  }
  try {
    adam.validate();
    newton.validate();
  } catch (const SolverError& e) {
    fail(e.what());
  }
  if (nlp.max_iters < 1 || !(nlp.stationarity_tol > 0.0) || !(nlp.feasibility_tol > 0.0)) fail("invalid NLP options");
  if (is_burgers(experiment)) {
    if (sigma != 0.0) fail("Burgers experiments use noise-free data (sigma = 0)");
    if (true_eps.size() != 2 || initial_eps.size() != 2) fail("Burgers needs two true and two initial parameters");
    if (!(hessian_step > 0.0)) fail("hessian_step must be positive");
  } else if (is_kpp(experiment)) {
    if (exact_sqrt(basis_count) < 1 || model_count < 1 || exact_sqrt(model_count) < 1) {
      fail("Fisher-KPP N and M must be positive perfect squares");
    }
    if (exact_sqrt(measurement_count) < 1) fail("Fisher-KPP C must be a perfect square (uniform grid)");
    if (!measurement_points.empty()) fail("Fisher-KPP measurement points are the uniform interior grid");
    if (experiment == ExperimentKind::KppEcfm && !(sigma > 0.0)) fail("KppEcfm needs sigma > 0");
    if (experiment == ExperimentKind::KppEcfm && measurement_count < 2) fail("KppEcfm needs C >= 2");
    if (!(confidence_alpha > 0.0 && confidence_alpha < 1.0)) fail("confidence_alpha must be in (0, 1)");
    if (!initial_eps.empty() && static_cast<int>(initial_eps.size()) != model_count) fail("initial_eps must have M entries");
  } else {
    if (model_count < 1) fail("beam needs M >= 1");
    if (replicates < 2) fail("beam needs D >= 2 replicates");
    if (true_eps.size() != 1 || initial_eps.size() != 1) fail("beam needs one true and one initial load");
    if (!(end_stiffness >= 0.0)) fail("end_stiffness must be non-negative (0 calibrates)");
    if (!(penalty_weight > 0.0)) fail("penalty_weight must be positive");
  }
}

ExperimentConfig parse_config(const json& j) {
  reject_unknown(j, "config", {"experiment", "discretization", "physics", "noise", "optimizer", "output_dir", "data_file"});
  if (!j.contains("experiment") || !j.at("experiment").is_string()) {
    throw SolverError(ErrorKind::ConfigError, "config needs an 'experiment' string");
  }
  ExperimentConfig c = ExperimentConfig::defaults(parse_experiment_kind(j.at("experiment").get<std::string>()));
  if (j.contains("discretization")) {
    const json& d = j.at("discretization");
    reject_unknown(d, "discretization", {"N", "M", "C", "D", "P", "T", "reference_N", "quadrature_scale"});
    read_key(d, "N", c.basis_count);
    read_key(d, "M", c.model_count);
    read_key(d, "C", c.measurement_count);
    read_key(d, "D", c.replicates);
    read_key(d, "P", c.time_steps);
    read_key(d, "T", c.total_time);
    read_key(d, "reference_N", c.reference_basis_count);
    read_key(d, "quadrature_scale", c.quadrature_scale);
  }
  if (j.contains("physics")) {
    const json& p = j.at("physics");
    reject_unknown(p, "physics", {"true_eps", "measurement_points", "diffusion", "reaction", "end_stiffness", "load",
                                  "source_amplitude", "constraint_width"});
    read_key(p, "true_eps", c.true_eps);
    read_key(p, "measurement_points", c.measurement_points);
    read_key(p, "diffusion", c.diffusion);
    read_key(p, "reaction", c.reaction);
    read_key(p, "end_stiffness", c.end_stiffness);
    read_key(p, "load", c.load);
    read_key(p, "source_amplitude", c.source_amplitude);
    read_key(p, "constraint_width", c.constraint_width);
  }
  if (j.contains("noise")) {
    const json& n = j.at("noise");
    reject_unknown(n, "noise", {"sigma", "seed"});
    read_key(n, "sigma", c.sigma);
    read_key(n, "seed", c.seed);
  }
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    reject_unknown(o, "optimizer",
                   {"initial_eps", "learning_rate", "beta1", "beta2", "adam_eps", "epochs", "max_consecutive_failures",
                    "max_iters", "stationarity_tol", "feasibility_tol", "newton_tol", "newton_max_iters",
                    "confidence_alpha", "penalty_weight", "hessian_step"});
    read_key(o, "initial_eps", c.initial_eps);
    read_key(o, "learning_rate", c.adam.learning_rate);
    read_key(o, "beta1", c.adam.beta1);
    read_key(o, "beta2", c.adam.beta2);
    read_key(o, "adam_eps", c.adam.eps);
    read_key(o, "epochs", c.adam.epochs);
    read_key(o, "max_consecutive_failures", c.adam.max_consecutive_failures);
    read_key(o, "max_iters", c.nlp.max_iters);
    read_key(o, "stationarity_tol", c.nlp.stationarity_tol);
    read_key(o, "feasibility_tol", c.nlp.feasibility_tol);
    read_key(o, "newton_tol", c.newton.tol);
    read_key(o, "newton_max_iters", c.newton.max_iters);
    read_key(o, "confidence_alpha", c.confidence_alpha);
    read_key(o, "penalty_weight", c.penalty_weight);
    read_key(o, "hessian_step", c.hessian_step);
  }
  read_key(j, "output_dir", c.output_dir);
  read_key(j, "data_file", c.data_file);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw SolverError(ErrorKind::ConfigError, "invalid JSON in " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.experiment);
  j["discretization"] = {{"N", c.basis_count}, {"M", c.model_count}, {"C", c.measurement_count},
                         {"D", c.replicates}, {"P", c.time_steps}, {"T", c.total_time},
                         {"reference_N", c.reference_basis_count}, {"quadrature_scale", c.quadrature_scale}};
  j["physics"] = {{"true_eps", c.true_eps}, {"measurement_points", c.measurement_points},
                  {"diffusion", c.diffusion}, {"reaction", c.reaction}, {"end_stiffness", c.end_stiffness},
                  {"load", c.load}, {"source_amplitude", c.source_amplitude},
                  {"constraint_width", c.constraint_width}};
  j["noise"] = {{"sigma", c.sigma}, {"seed", c.seed}};
  j["optimizer"] = {{"initial_eps", c.initial_eps},
                    {"learning_rate", c.adam.learning_rate},
                    {"beta1", c.adam.beta1},
                    {"beta2", c.adam.beta2},
                    {"adam_eps", c.adam.eps},
                    {"epochs", c.adam.epochs},
                    {"max_consecutive_failures", c.adam.max_consecutive_failures},
                    {"max_iters", c.nlp.max_iters},
                    {"stationarity_tol", c.nlp.stationarity_tol},
                    {"feasibility_tol", c.nlp.feasibility_tol},
                    {"newton_tol", c.newton.tol},
                    {"newton_max_iters", c.newton.max_iters},
                    {"confidence_alpha", c.confidence_alpha},
                    {"penalty_weight", c.penalty_weight},
                    {"hessian_step", c.hessian_step}};
  j["output_dir"] = c.output_dir;
  if (!c.data_file.empty()) j["data_file"] = c.data_file;
  return j;
}

json report_to_json(const ExperimentReport& r) {
  json j;
  j["experiment"] = r.experiment;
  j["status"] = r.status;
  j["message"] = r.message;
  j["recovered_params"] = r.recovered_params;
  j["objective_trace"] = r.objective_trace;
  j["constraint_violation_trace"] = r.constraint_violation_trace;
  j["final_constraint_forces"] = r.final_constraint_forces;
  j["error_metrics"] = r.error_metrics;
  j["diagnostics"] = r.diagnostics;
  j["hessian_condition"] = r.hessian_condition ? json(*r.hessian_condition) : json(nullptr);
  j["wall_time"] = r.wall_time;
  return j;
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  try {
    r.experiment = j.at("experiment").get<std::string>();
    r.status = j.at("status").get<std::string>();
    r.message = j.at("message").get<std::string>();
    r.recovered_params = j.at("recovered_params").get<std::vector<double>>();
    r.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    r.constraint_violation_trace = j.at("constraint_violation_trace").get<std::vector<double>>();
    r.final_constraint_forces = j.at("final_constraint_forces").get<std::vector<double>>();
    r.error_metrics = j.at("error_metrics").get<std::map<std::string, double>>();
    r.diagnostics = j.at("diagnostics").get<std::map<std::string, double>>();
    if (!j.at("hessian_condition").is_null()) r.hessian_condition = j.at("hessian_condition").get<double>();
    r.wall_time = j.at("wall_time").get<double>();
  } catch (const json::exception& e) {
    throw SolverError(ErrorKind::ConfigError, std::string("malformed report: ") + e.what());
  }
  return r;
}

// ---- Burgers ---------------------------------------------------------------

BurgersProblem build_burgers(const ExperimentConfig& config) {
  BurgersProblem p{BasisFamily::sine_1d(config.basis_count), {}, TimeGrid{config.total_time, config.time_steps}, {}, {}};
  p.points = config.measurement_points.empty() ? uniform_interior(config.measurement_count) : config.measurement_points;
  const double width = config.constraint_width > 0.0 ? config.constraint_width : 1.0 / (config.measurement_count + 1);
  const AssemblyOptions opts{config.quadrature_scale};
  p.ops = assemble_burgers(
      p.basis, BasisFamily::hat_1d(width), p.points,
      [](double x, double t) { return std::sin(2.0 * M_PI * x) * std::sin(2.0 * M_PI * t); }, p.grid, opts);
  p.theta0 = project_initial_condition(
      p.ops.mass, assemble_load_1d(p.basis, [](double x) { return std::sin(2.0 * M_PI * x); }, {0.0, 1.0}, opts));
  return p;
}

Matrix generate_burgers_data(const ExperimentConfig& config) {
  config.validate();
  const BurgersProblem p = build_burgers(config);
  const Trajectory tr = march_burgers_standard(p.ops, p.grid, to_vector(config.true_eps), p.theta0, config.newton);
  return p.ops.measurement * tr.theta.transpose();
}

CsvTable burgers_data_table(const ExperimentConfig& config, const Matrix& data) {
  CsvTable t;
  t.header = {"t"};
  for (Eigen::Index i = 0; i < data.rows(); ++i) t.header.push_back("v" + std::to_string(i + 1));
  const TimeGrid grid{config.total_time, config.time_steps};
  t.rows.resize(data.cols(), data.rows() + 1);
  for (Eigen::Index n = 0; n < data.cols(); ++n) {
    t.rows(n, 0) = grid.node(static_cast<int>(n));
    t.rows.row(n).tail(data.rows()) = data.col(n).transpose();
  }
  return t;
}

Matrix burgers_data_from_table(const ExperimentConfig& config, const CsvTable& table) {
  if (table.rows.cols() != config.measurement_count + 1 || table.rows.rows() != config.time_steps + 1) {
    throw SolverError(ErrorKind::ConfigError, "Burgers data must have P+1 rows and C+1 columns");
  }
  return table.rows.rightCols(config.measurement_count).transpose();
}

ValueAndGradient burgers_objective(const BurgersProblem& p, const Matrix& data, const Vector& eps, bool ecfm,
                                   const NewtonConfig& newton) {
  const double dt = p.grid.dt();
  if (ecfm) {
    const Trajectory tr = march_burgers_ecfm(p.ops, p.grid, eps, p.theta0, data, newton);
    const SensitivityTrajectory s = march_sensitivity_ecfm(p.ops, p.grid, eps, tr);
    return {objective_ecfm(tr, dt), grad_objective_ecfm(tr, s, dt)};
  }
  const Trajectory tr = march_burgers_standard(p.ops, p.grid, eps, p.theta0, newton);
  const SensitivityTrajectory s = march_sensitivity_standard(p.ops, p.grid, eps, tr);
  return {objective_standard(p.ops, tr, data, dt), grad_objective_standard(p.ops, tr, s, data, dt)};
}

namespace {

ExperimentReport run_burgers(const ExperimentConfig& config, const Matrix& data, bool ecfm) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const BurgersProblem p = build_burgers(config);
  if (data.rows() != p.ops.constraints() || data.cols() != p.grid.steps + 1) {
    throw SolverError(ErrorKind::DimensionMismatch, "Burgers data must be C x (P+1)");
  }
  ExperimentReport report;
  report.experiment = ecfm ? "burgers_ecfm" : "burgers_inv";
  const OptResult res = adam_minimize(
      [&](const Vector& e) { return burgers_objective(p, data, e, ecfm, config.newton); }, to_vector(config.initial_eps),
      config.adam);
  apply_opt_status(report, res);
  report.recovered_params = to_std(res.x);
  const Vector truth = to_vector(config.true_eps);
  report.error_metrics["parameter_relative_error"] = (res.x - truth).norm() / truth.norm();
  report.error_metrics["eps1_abs_error"] = std::abs(res.x(0) - truth(0));
  report.error_metrics["eps2_abs_error"] = std::abs(res.x(1) - truth(1));
  report.tables["trace"] = trace_table(report);

  try {
    const double dt = p.grid.dt();
    auto value = [&](const Vector& e) {
      if (ecfm) return objective_ecfm(march_burgers_ecfm(p.ops, p.grid, e, p.theta0, data, config.newton), dt);
      return objective_standard(p.ops, march_burgers_standard(p.ops, p.grid, e, p.theta0, config.newton), data, dt);
    };
    report.diagnostics["final_objective"] = value(res.x);
    report.hessian_condition = hessian_condition(value, res.x, config.hessian_step);

    const Trajectory truth_tr = march_burgers_standard(p.ops, p.grid, truth, p.theta0, config.newton);
    const Trajectory rec = ecfm ? march_burgers_ecfm(p.ops, p.grid, res.x, p.theta0, data, config.newton)
                                : march_burgers_standard(p.ops, p.grid, res.x, p.theta0, config.newton);
    const Matrix tab = tabulate_basis(p.basis, line_grid());
    const Matrix u = truth_tr.theta.bottomRows(p.grid.steps) * tab.transpose();
    const Matrix w = rec.theta.bottomRows(p.grid.steps) * tab.transpose();
    report.error_metrics["field_relative_l1"] = relative_l1(u, w);
    report.diagnostics["data_norm"] = data.norm();

    CsvTable field;
    field.header = {"x", "u_truth_T", "w_recovered_T"};
    const std::vector<double> xs = line_grid();
    field.rows.resize(static_cast<Eigen::Index>(xs.size()), 3);
    field.rows.col(0) = to_vector(xs);
    field.rows.col(1) = u.row(u.rows() - 1).transpose();
    field.rows.col(2) = w.row(w.rows() - 1).transpose();
    report.tables["field"] = field;

    if (ecfm) {
      const Matrix& lam = *rec.lambda;
      report.final_constraint_forces = to_std(lam.row(lam.rows() - 1).transpose());
      report.diagnostics["lambda_norm"] = lam.norm();
      CsvTable forces;
      forces.header = {"t"};
      for (int i = 0; i < p.ops.constraints(); ++i) forces.header.push_back("lambda" + std::to_string(i + 1));
      forces.rows.resize(lam.rows(), lam.cols() + 1);
      for (Eigen::Index n = 0; n < lam.rows(); ++n) {
        forces.rows(n, 0) = p.grid.node(static_cast<int>(n));
        forces.rows.row(n).tail(lam.cols()) = lam.row(n);
      }
      report.tables["forces"] = forces;
    }
  } catch (const SolverError& e) {
    report.status = "solver_failure";
    report.message = std::string("post-processing failed: ") + e.what();
  }
  report.wall_time = elapsed(start);
  return report;
}

}  // namespace

ExperimentReport run_burgers_inverse(const ExperimentConfig& config, const Matrix& data) {
  return run_burgers(config, data, false);
}

ExperimentReport run_burgers_ecfm(const ExperimentConfig& config, const Matrix& data) {
  return run_burgers(config, data, true);
}

// ---- Fisher-KPP --------------------------------------------------------------

KppProblem build_kpp(const ExperimentConfig& config) {
  const double width = config.constraint_width > 0.0 ? config.constraint_width : 500.0;
  KppProblem p{BasisFamily::tensor_sine_2d(config.basis_count), BasisFamily::tensor_sine_2d(config.model_count),
               BasisFamily::gaussian_rbf(width), {}, {}};
  const int k = exact_sqrt(config.measurement_count);
  for (int a = 1; a <= k; ++a) {
    for (int b = 1; b <= k; ++b) {
      p.points.push_back({static_cast<double>(a) / (k + 1), static_cast<double>(b) / (k + 1)});
    }
  }
  p.ops = assemble_kpp(p.basis, p.source_basis, p.constraint_basis, p.points, config.diffusion, config.reaction,
                       AssemblyOptions{config.quadrature_scale});
  return p;
}

double kpp_truth_source(const ExperimentConfig& config, Point2 x) {
  const bool inside = x.x1 >= 0.25 && x.x1 <= 0.75 && x.x2 >= 0.25 && x.x2 <= 0.75;
  return inside ? config.source_amplitude : 0.0;
}

KppData generate_kpp_data(const ExperimentConfig& config) {
  config.validate();
  const KppProblem p = build_kpp(config);
  const Vector b = assemble_load_2d(
      p.basis, [&](Point2 x) { return kpp_truth_source(config, x); }, {0.0, 0.25, 0.75, 1.0},
      AssemblyOptions{config.quadrature_scale});
  const double r = p.ops.reaction;
  const Matrix lin = p.ops.stiffness - r * p.ops.mass;
  auto residual = [&](const Vector& th) -> Vector { return lin * th + r * p.ops.advection.contract(th, th) - b; };
  auto jacobian = [&](const Vector& th) -> Matrix { return lin + r * p.ops.advection.jacobian(th); };
  KppData d;
  d.points = p.points;
  d.truth_theta = newton_solve(residual, jacobian, lu_solve(lin, b), config.newton).x;
  d.clean = p.ops.measurement * d.truth_theta;
  d.values = d.clean + sample_noise(NoiseModel{config.sigma, config.seed}, config.measurement_count);
  return d;
}

CsvTable kpp_data_table(const KppData& data) {
  CsvTable t;
  t.header = {"x1", "x2", "v"};
  t.rows.resize(data.values.size(), 3);
  for (Eigen::Index i = 0; i < data.values.size(); ++i) {
    t.rows(i, 0) = data.points[static_cast<size_t>(i)].x1;
    t.rows(i, 1) = data.points[static_cast<size_t>(i)].x2;
    t.rows(i, 2) = data.values(i);
  }
  return t;
}

std::pair<Vector, Vector> kpp_warm_start(const KppProblem& p, const Vector& data, const NewtonConfig& newton) {
  const Vector theta_fit = p.ops.measurement.colPivHouseholderQr().solve(data);
  const double r = p.ops.reaction;
  const Vector forcing =
      (p.ops.stiffness - r * p.ops.mass) * theta_fit + r * p.ops.advection.contract(theta_fit, theta_fit);
  const Vector eps = p.ops.source.colPivHouseholderQr().solve(forcing);
  const Vector theta = solve_kpp_equilibrium(p.ops, eps, Vector::Zero(p.ops.constraints()), theta_fit, newton);
  return {eps, theta};
}

namespace {

struct KppFieldErrors {
  double field = 0.0;
  double source_model = 0.0;
  double source_total = 0.0;
};

constexpr int kEvalGrid = 200;

// Relative L1 field error and L1 source distances on the evaluation grid.
KppFieldErrors kpp_errors(const ExperimentConfig& config, const KppProblem& p, const Vector& truth_theta,
                          const Vector& theta, const Vector& eps, const Vector& lambda, CsvTable* table) {
  KppFieldErrors out;
  const Matrix u = tensor_field(p.basis, truth_theta, kEvalGrid);
  const Matrix w = tensor_field(p.basis, theta, kEvalGrid);
  out.field = relative_l1(u, w);
  const Matrix b = tensor_field(p.source_basis, eps, kEvalGrid);
  const std::vector<double> xs = line_grid(kEvalGrid);
  Matrix s(kEvalGrid, kEvalGrid);
  Matrix forces = Matrix::Zero(kEvalGrid, kEvalGrid);
  for (int a = 0; a < kEvalGrid; ++a) {
    for (int c = 0; c < kEvalGrid; ++c) {
      const Point2 x{xs[static_cast<size_t>(a)], xs[static_cast<size_t>(c)]};
      s(a, c) = kpp_truth_source(config, x);
      if (lambda.size() > 0) {
        double f = 0.0;
        for (Eigen::Index i = 0; i < lambda.size(); ++i) {
          f += lambda(i) * eval_constraint_shape(p.constraint_basis, p.points[static_cast<size_t>(i)], x);
        }
        forces(a, c) = f;
      }
    }
  }
  const double cell = 1.0 / (kEvalGrid * kEvalGrid);
  out.source_model = (b - s).cwiseAbs().sum() * cell;
  out.source_total = (b + forces - s).cwiseAbs().sum() * cell;
  if (table) {
    // every fourth cell keeps the side file small
    table->header = {"x1", "x2", "u_truth", "w_recovered", "source_truth", "source_model", "source_total"};
    const int stride = 4;
    const int g = kEvalGrid / stride;
    table->rows.resize(g * g, 7);
    int row = 0;
    for (int a = 0; a < kEvalGrid; a += stride) {
      for (int c = 0; c < kEvalGrid; c += stride) {
        table->rows.row(row++) << xs[static_cast<size_t>(a)], xs[static_cast<size_t>(c)], u(a, c), w(a, c), s(a, c),
            b(a, c), b(a, c) + forces(a, c);
      }
    }
  }
  return out;
}

void check_kpp_data(const KppProblem& p, const KppData& data) {
  if (data.values.size() != p.ops.constraints() || data.truth_theta.size() != p.ops.size()) {
    throw SolverError(ErrorKind::DimensionMismatch, "Fisher-KPP data does not match the configured discretization");
  }
}

}  // namespace

ExperimentReport run_kpp_inverse(const ExperimentConfig& config, const KppData& data) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const KppProblem p = build_kpp(config);
  check_kpp_data(p, data);
  const int m = config.model_count;
  const int n = p.ops.size();
  const double r = p.ops.reaction;
  const Matrix& meas = p.ops.measurement;
  const Matrix mtm = meas.transpose() * meas;
  const Vector& v = data.values;

  auto [eps0, theta0] = kpp_warm_start(p, v, config.newton);
  if (!config.initial_eps.empty()) {
    eps0 = to_vector(config.initial_eps);
    theta0 = solve_kpp_equilibrium(p.ops, eps0, Vector::Zero(p.ops.constraints()), theta0, config.newton);
  }

  NLPProblem prob;
  prob.x0.resize(m + n);
  prob.x0 << eps0, theta0;
  prob.objective = [&](const Vector& x) { return 0.5 * (meas * x.tail(n) - v).squaredNorm(); };
  prob.objective_gradient = [&](const Vector& x) {
    Vector g = Vector::Zero(m + n);
    g.tail(n) = meas.transpose() * (meas * x.tail(n) - v);
    return g;
  };
  prob.num_eq = n;
  prob.eq_constraints = [&](const Vector& x) { return residual_kpp(p.ops, x.tail(n), x.head(m)); };
  prob.eq_jacobian = [&](const Vector& x) {
    Matrix j(n, m + n);
    j.leftCols(m) = residual_kpp_deps(p.ops);
    j.rightCols(n) = residual_kpp_jac(p.ops, x.tail(n));
    return j;
  };
  prob.lagrangian_hessian = [&](const Vector&, const Vector& y, const Vector&) {
    Matrix h = Matrix::Zero(m + n, m + n);
    h.bottomRightCorner(n, n) = mtm - r * p.ops.advection.weighted_hessian(y);
    return h;
  };
  const OptResult res = solve_nlp(prob, config.nlp);

  ExperimentReport report;
  report.experiment = "kpp_inv";
  apply_opt_status(report, res);
  const Vector eps = res.x.head(m);
  const Vector theta = res.x.tail(n);
  report.recovered_params = to_std(eps);
  CsvTable field;
  const KppFieldErrors err = kpp_errors(config, p, data.truth_theta, theta, eps, Vector(), &field);
  report.error_metrics["field_relative_l1"] = err.field;
  report.error_metrics["source_l1_model"] = err.source_model;
  report.diagnostics["equilibrium_residual"] = residual_kpp(p.ops, theta, eps).norm();
  const Vector e = meas * theta - v;
  const SampleMoments sm = sample_moments(e);
  report.diagnostics["discrepancy_mean"] = sm.mean;
  report.diagnostics["discrepancy_variance"] = sm.variance;
  // Two-sided chi-squared variance test of the residuals against sigma^2.
  const ConfidenceBounds cb = confidence_bounds(config.sigma, config.measurement_count, config.confidence_alpha);
  report.diagnostics["variance_lower_bound"] = cb.variance_lower;
  report.diagnostics["variance_upper_bound"] = cb.variance_upper;
  report.diagnostics["variance_test_rejects"] =
      (sm.variance < cb.variance_lower || sm.variance > cb.variance_upper) ? 1.0 : 0.0;
  report.tables["trace"] = trace_table(report);
  report.tables["field"] = field;
  report.wall_time = elapsed(start);
  return report;
}

ExperimentReport run_kpp_ecfm(const ExperimentConfig& config, const KppData& data) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const KppProblem p = build_kpp(config);
  check_kpp_data(p, data);
  const int m = config.model_count;
  const int c = p.ops.constraints();
  const int n = p.ops.size();
  const double r = p.ops.reaction;
  const Matrix& meas = p.ops.measurement;
  const Vector& v = data.values;
  const ConfidenceBounds cb = confidence_bounds(config.sigma, c, config.confidence_alpha);
  const Vector ones_c = Vector::Ones(c);
  const Matrix var_hess =
      (2.0 / (c - 1)) * meas.transpose() * (Matrix::Identity(c, c) - ones_c * ones_c.transpose() / c) * meas;

  auto [eps0, theta0] = kpp_warm_start(p, v, config.newton);
  if (!config.initial_eps.empty()) {
    eps0 = to_vector(config.initial_eps);
    theta0 = solve_kpp_equilibrium(p.ops, eps0, Vector::Zero(c), theta0, config.newton);
  }

  // x = (eps, lambda, theta)
  NLPProblem prob;
  prob.x0 = Vector::Zero(m + c + n);
  prob.x0.head(m) = eps0;
  prob.x0.tail(n) = theta0;
  prob.objective = [&](const Vector& x) { return 0.5 * x.segment(m, c).squaredNorm(); };
  prob.objective_gradient = [&](const Vector& x) {
    Vector g = Vector::Zero(m + c + n);
    g.segment(m, c) = x.segment(m, c);
    return g;
  };
  prob.num_eq = n;
  prob.eq_constraints = [&](const Vector& x) {
    return residual_kpp(p.ops, x.tail(n), x.head(m), Vector(x.segment(m, c)));
  };
  prob.eq_jacobian = [&](const Vector& x) {
    Matrix j(n, m + c + n);
    j.leftCols(m) = residual_kpp_deps(p.ops);
    j.middleCols(m, c) = residual_kpp_dlambda(p.ops);
    j.rightCols(n) = residual_kpp_jac(p.ops, x.tail(n));
    return j;
  };
  prob.num_ineq = 4;
  prob.ineq_constraints = [&](const Vector& x) {
    const SampleMoments sm = sample_moments(meas * x.tail(n) - v);
    Vector ci(4);
    ci << sm.mean - cb.mean_lower, cb.mean_upper - sm.mean, sm.variance - cb.variance_lower,
        cb.variance_upper - sm.variance;
    return ci;
  };
  prob.ineq_jacobian = [&](const Vector& x) {
    const Vector e = meas * x.tail(n) - v;
    const double mean = e.mean();
    const Vector dmean = meas.transpose() * ones_c / c;
    const Vector dvar = meas.transpose() * ((2.0 / (c - 1)) * (e.array() - mean).matrix());
    Matrix j = Matrix::Zero(4, m + c + n);
    j.block(0, m + c, 1, n) = dmean.transpose();
    j.block(1, m + c, 1, n) = -dmean.transpose();
    j.block(2, m + c, 1, n) = dvar.transpose();
    j.block(3, m + c, 1, n) = -dvar.transpose();
    return j;
  };
  prob.lagrangian_hessian = [&](const Vector&, const Vector& y, const Vector& mu) {
    Matrix h = Matrix::Zero(m + c + n, m + c + n);
    h.block(m, m, c, c).setIdentity();
    h.bottomRightCorner(n, n) = -r * p.ops.advection.weighted_hessian(y) - (mu(2) - mu(3)) * var_hess;
    return h;
  };
  const OptResult res = solve_nlp(prob, config.nlp);

  ExperimentReport report;
  report.experiment = "kpp_ecfm";
  apply_opt_status(report, res);
  const Vector eps = res.x.head(m);
  const Vector lambda = res.x.segment(m, c);
  const Vector theta = res.x.tail(n);
  report.recovered_params = to_std(eps);
  report.final_constraint_forces = to_std(lambda);
  CsvTable field;
  const KppFieldErrors err = kpp_errors(config, p, data.truth_theta, theta, eps, lambda, &field);
  report.error_metrics["field_relative_l1"] = err.field;
  report.error_metrics["source_l1_model"] = err.source_model;
  report.error_metrics["source_l1_with_forces"] = err.source_total;
  report.diagnostics["equilibrium_residual"] = residual_kpp(p.ops, theta, eps, lambda).norm();
  const SampleMoments sm = sample_moments(meas * theta - v);
  report.diagnostics["discrepancy_mean"] = sm.mean;
  report.diagnostics["discrepancy_variance"] = sm.variance;
  report.diagnostics["mean_lower_bound"] = cb.mean_lower;
  report.diagnostics["mean_upper_bound"] = cb.mean_upper;
  report.diagnostics["variance_lower_bound"] = cb.variance_lower;
  report.diagnostics["variance_upper_bound"] = cb.variance_upper;
  report.diagnostics["lambda_norm"] = lambda.norm();
  report.diagnostics["data_norm"] = v.norm();
  if (res.status == OptStatus::Infeasible) {
    const Vector ci = prob.ineq_constraints(res.x);
    const char* names[] = {"mean >= l1", "mean <= l2", "variance >= p1", "variance <= p2"};
    std::string violated;
    for (int k = 0; k < 4; ++k) {
      if (ci(k) < -config.nlp.feasibility_tol) violated += std::string(violated.empty() ? "" : ", ") + names[k];
    }
    if (report.diagnostics["equilibrium_residual"] > config.nlp.feasibility_tol) {
      violated += std::string(violated.empty() ? "" : ", ") + "equilibrium";
    }
    report.message += "; violated: " + (violated.empty() ? std::string("none") : violated);
  }
  report.tables["trace"] = trace_table(report);
  report.tables["field"] = field;
  CsvTable forces;
  forces.header = {"x1", "x2", "lambda"};
  forces.rows.resize(c, 3);
  for (int i = 0; i < c; ++i) forces.rows.row(i) << p.points[static_cast<size_t>(i)].x1, p.points[static_cast<size_t>(i)].x2, lambda(i);
  report.tables["forces"] = forces;
  report.wall_time = elapsed(start);
  return report;
}

// ---- stochastic beam -----------------------------------------------------------

namespace {

BeamOperatorSet make_beam(int basis_count, double h0, double load, const std::vector<double>& points,
                          double hat_width, const AssemblyOptions& opts) {
  return assemble_beam(
      BasisFamily::clamped_beam_sine(basis_count), beam_defect_stiffness(h0), h0, [load](double) { return load; },
      BasisFamily::hat_1d(hat_width), points, {0.0, 0.5, 1.0}, opts);
}

double beam_end_stiffness(const ExperimentConfig& config) {
  return config.end_stiffness > 0.0
             ? config.end_stiffness
             : calibrate_end_stiffness(config.basis_count, kBeamTargetCriticalLoad, AssemblyOptions{config.quadrature_scale});
}

std::vector<double> beam_points(const ExperimentConfig& config) {
  return config.measurement_points.empty() ? uniform_interior(config.measurement_count) : config.measurement_points;
}

}  // namespace

double calibrate_end_stiffness(int basis_count, double target_critical_load, const AssemblyOptions& options) {
  if (!(target_critical_load > 0.0)) throw SolverError(ErrorKind::InvalidArgument, "target load must be positive");
  // Bending and boundary terms are linear in H0 and the geometric term does
  // not involve it, so the buckling load scales linearly.
  const BeamOperatorSet unit = make_beam(basis_count, 1.0, 0.0, {}, 1.0, options);
  return target_critical_load / critical_load(unit, 1.0);
}

BeamOperatorSet build_beam(const ExperimentConfig& config, int basis_count) {
  const double width = config.constraint_width > 0.0 ? config.constraint_width : 1.0 / (config.measurement_count + 1);
  return make_beam(basis_count, beam_end_stiffness(config), config.load, beam_points(config), width,
                   AssemblyOptions{config.quadrature_scale});
}

MeasurementReplicates generate_beam_data(const ExperimentConfig& config) {
  config.validate();
  const BeamOperatorSet ops = build_beam(config, config.basis_count);
  const BasisFamily legendre = BasisFamily::shifted_legendre(config.model_count);
  const StochasticGramian gram = stochastic_gramian(legendre);
  const StochasticSolution sol =
      solve_stochastic_galerkin(ops, gram, config.true_eps[0], Vector::Zero(ops.constraints()));
  const Vector omega = sample_uniform(config.seed, config.replicates);
  MeasurementReplicates data;
  data.points = beam_points(config);
  data.values.resize(ops.constraints(), config.replicates);
  for (int j = 0; j < config.replicates; ++j) {
    data.values.col(j) = ops.measurement * sol.coefficients.at(legendre, omega(j));
  }
  return data;
}

CsvTable beam_data_table(const MeasurementReplicates& data) {
  CsvTable t;
  t.header = {"x"};
  for (int j = 0; j < data.replicates(); ++j) t.header.push_back("r" + std::to_string(j + 1));
  t.rows.resize(data.locations(), data.replicates() + 1);
  for (int i = 0; i < data.locations(); ++i) {
    t.rows(i, 0) = data.points[static_cast<size_t>(i)];
    t.rows.row(i).tail(data.replicates()) = data.values.row(i);
  }
  return t;
}

MeasurementReplicates beam_data_from_table(const CsvTable& table) {
  if (table.rows.cols() < 3) throw SolverError(ErrorKind::ConfigError, "beam data needs x and at least two replicates");
  MeasurementReplicates d;
  d.points = to_std(table.rows.col(0));
  d.values = table.rows.rightCols(table.rows.cols() - 1);
  d.validate();
  return d;
}

ValueAndGradient beam_likelihood(const BeamOperatorSet& ops, const StochasticGramian& gram,
                                 const MeasurementReplicates& data, const Vector& x, bool* floored) {
  const int c = ops.constraints();
  if (x.size() != c + 1) throw SolverError(ErrorKind::DimensionMismatch, "beam variables are (eps, lambda)");
  const StochasticSolution sol = solve_stochastic_galerkin(ops, gram, x(0), x.tail(c));
  const StochasticSensitivity sens = stochastic_sensitivity(sol, ops, gram);
  const LikelihoodGradient g = grad_pseudo_likelihood(sol.coefficients.theta, gram, ops.measurement, data, sens);
  if (floored) *floored = g.floored;
  ValueAndGradient out;
  out.value = g.value;
  out.gradient.resize(c + 1);
  out.gradient(0) = g.d_eps;
  out.gradient.tail(c) = g.d_lambda;
  return out;
}

ExperimentReport run_beam_ecfm(const ExperimentConfig& config, const MeasurementReplicates& data) {
  config.validate();
  data.validate();
  const auto start = std::chrono::steady_clock::now();
  const BeamOperatorSet ops = build_beam(config, config.basis_count);
  if (data.locations() != ops.constraints()) {
    throw SolverError(ErrorKind::DimensionMismatch, "replicate rows do not match the measurement points");
  }
  const BasisFamily legendre = BasisFamily::shifted_legendre(config.model_count);
  const StochasticGramian gram = stochastic_gramian(legendre);
  const int c = ops.constraints();

  Vector x0 = Vector::Zero(c + 1);
  x0(0) = config.initial_eps[0];
  auto force_term = [c](const Vector& x) {
    ValueAndGradient out;
    out.value = 0.5 * x.tail(c).squaredNorm();
    out.gradient = Vector::Zero(c + 1);
    out.gradient.tail(c) = x.tail(c);
    return out;
  };
  auto likelihood = [&](const Vector& x) { return beam_likelihood(ops, gram, data, x); };
  const OptResult res =
      penalty_minimize(force_term, {likelihood}, config.penalty_weight, config.nlp, x0, PenaltyOptions{true, 1e-12});

  ExperimentReport report;
  report.experiment = "beam_ecfm";
  apply_opt_status(report, res);
  const double eps = res.x(0);
  const Vector lambda = res.x.tail(c);
  report.recovered_params = {eps};
  report.final_constraint_forces = to_std(lambda);
  report.diagnostics["lambda_norm"] = lambda.norm();
  report.diagnostics["data_norm"] = data.values.norm();
  report.diagnostics["end_stiffness"] = ops.end_stiffness();
  report.error_metrics["parameter_abs_error"] = std::abs(eps - config.true_eps[0]);

  try {
    bool floored = false;
    report.diagnostics["pseudo_log_likelihood"] = beam_likelihood(ops, gram, data, res.x, &floored).value;
    report.diagnostics["variance_floor_hit"] = floored ? 1.0 : 0.0;
    if (floored) report.message += (report.message.empty() ? "" : "; ") + std::string("variance floor active");

    // Expected relative L1 error over x and omega against the data-generating expansion.
    const StochasticSolution truth = solve_stochastic_galerkin(ops, gram, config.true_eps[0], Vector::Zero(c));
    const StochasticSolution rec = solve_stochastic_galerkin(ops, gram, eps, lambda);
    const std::vector<double> xs = line_grid();
    const Matrix tab = tabulate_basis(ops.basis(), xs);
    const std::vector<double> omegas = line_grid(200);
    double num = 0.0;
    double den = 0.0;
    for (double w : omegas) {
      const Vector psi = stochastic_values(legendre, w);
      const Vector u = tab * (truth.coefficients.theta * psi);
      const Vector uh = tab * (rec.coefficients.theta * psi);
      num += (u - uh).cwiseAbs().sum();
      den += u.cwiseAbs().sum();
    }
    report.error_metrics["expected_relative_l1"] = num / den;

    // PCE against a finer deterministic discretization at three realizations.
    const BeamOperatorSet ref_ops = build_beam(config, config.reference_basis_count);
    const Matrix ref_tab = tabulate_basis(ref_ops.basis(), xs);
    CsvTable check;
    check.header = {"x"};
    check.rows.resize(static_cast<Eigen::Index>(xs.size()), 7);
    check.rows.col(0) = to_vector(xs);
    int col = 1;
    for (double w : {0.0, 0.5, 1.0}) {
      const Vector ref = ref_tab * solve_beam_deterministic(ref_ops, w, config.true_eps[0], Vector::Zero(c));
      const Vector pce = tab * truth.coefficients.at(legendre, w);
      const std::string tag = w == 0.0 ? "0" : (w == 0.5 ? "0.5" : "1");
      report.diagnostics["pce_reference_rel_l1_w" + tag] = (ref - pce).cwiseAbs().sum() / ref.cwiseAbs().sum();
      // same spatial basis, so only the stochastic truncation remains
      const Vector same = tab * solve_beam_deterministic(ops, w, config.true_eps[0], Vector::Zero(c));
      report.diagnostics["pce_truncation_rel_l1_w" + tag] = (same - pce).cwiseAbs().sum() / same.cwiseAbs().sum();
      check.header.push_back("reference_w" + tag);
      check.header.push_back("pce_w" + tag);
      check.rows.col(col++) = ref;
      check.rows.col(col++) = pce;
    }
    report.tables["pce_check"] = check;
    report.diagnostics["critical_load_w1"] = critical_load(ops, 1.0);
    report.diagnostics["critical_load_w0"] = critical_load(ops, 0.0);
  } catch (const SolverError& e) {
    report.status = "solver_failure";
    report.message += std::string("; post-processing failed: ") + e.what();
  }
  report.tables["trace"] = trace_table(report);
  report.tables["data"] = beam_data_table(data);
  report.wall_time = elapsed(start);
  return report;
}

// ---- shared tools ---------------------------------------------------------------

double hessian_condition(const std::function<double(const Vector&)>& f, const Vector& x, double step) {
  if (!(step > 0.0)) throw SolverError(ErrorKind::InvalidArgument, "Hessian step must be positive");
  const Eigen::Index n = x.size();
  Vector h(n);
  for (Eigen::Index i = 0; i < n; ++i) h(i) = step * std::max(std::abs(x(i)), 1.0);
  const double f0 = f(x);
  Matrix hess(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector a = x, b = x;
    a(i) += h(i);
    b(i) -= h(i);
    hess(i, i) = (f(a) - 2.0 * f0 + f(b)) / (h(i) * h(i));
    for (Eigen::Index j = i + 1; j < n; ++j) {
      Vector pp = x, pm = x, mp = x, mm = x;
      pp(i) += h(i), pp(j) += h(j);
      pm(i) += h(i), pm(j) -= h(j);
      mp(i) -= h(i), mp(j) += h(j);
      mm(i) -= h(i), mm(j) -= h(j);
      hess(i, j) = hess(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h(i) * h(j));
    }
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (hess + hess.transpose()));
  const Vector ev = es.eigenvalues().cwiseAbs();
  if (!(ev.minCoeff() > 0.0)) return std::numeric_limits<double>::infinity();
  return ev.maxCoeff() / ev.minCoeff();
}

std::pair<GridAxis, GridAxis> parse_grid(const std::string& text) {
  auto parse_axis = [&](const std::string& s) {
    GridAxis a;
    char c1 = 0, c2 = 0;
    std::istringstream in(s);
    if (!(in >> a.lo >> c1 >> a.hi >> c2 >> a.count) || c1 != ':' || c2 != ':' || !(in >> std::ws).eof()) {
      throw SolverError(ErrorKind::ConfigError, "grid axis must be lo:hi:n, got '" + s + "'");
    }
    if (a.count < 2 || !(a.hi > a.lo)) throw SolverError(ErrorKind::ConfigError, "grid axis needs n >= 2 and hi > lo");
    return a;
  };
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw SolverError(ErrorKind::ConfigError, "grid must have two axes");
  return {parse_axis(text.substr(0, comma)), parse_axis(text.substr(comma + 1))};
}

CsvTable scan_loss_surface(const ExperimentConfig& config, const Matrix& data, const GridAxis& ax1,
                           const GridAxis& ax2, int threads) {
  if (!is_burgers(config.experiment)) {
    throw SolverError(ErrorKind::ConfigError, "loss-surface scans are defined for the Burgers experiments");
  }
  config.validate();
  const BurgersProblem p = build_burgers(config);
  const bool ecfm = config.experiment == ExperimentKind::BurgersEcfm;
  const int total = ax1.count * ax2.count;
  CsvTable out;
  out.header = {"eps1", "eps2", ecfm ? "z_ecfm" : "z_inv"};
  out.rows.resize(total, 3);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int k = next++; k < total; k = next++) {
      const int i = k / ax2.count;
      const int j = k % ax2.count;
      Vector e(2);
      e << ax1.lo + (ax1.hi - ax1.lo) * i / (ax1.count - 1), ax2.lo + (ax2.hi - ax2.lo) * j / (ax2.count - 1);
      double z = std::numeric_limits<double>::quiet_NaN();
      try {
        z = ecfm ? objective_ecfm(march_burgers_ecfm(p.ops, p.grid, e, p.theta0, data, config.newton), p.grid.dt())
                 : objective_standard(p.ops, march_burgers_standard(p.ops, p.grid, e, p.theta0, config.newton), data,
                                      p.grid.dt());
      } catch (const SolverError&) {
      }
      out.rows.row(k) << e(0), e(1), z;
    }
  };
  int nthreads = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  nthreads = std::min(nthreads, total);
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  switch (config.experiment) {
    case ExperimentKind::BurgersInv:
    case ExperimentKind::BurgersEcfm: {
      const Matrix data = config.data_file.empty() ? generate_burgers_data(config)
                                                   : burgers_data_from_table(config, read_csv(config.data_file));
      ExperimentReport r = config.experiment == ExperimentKind::BurgersInv ? run_burgers_inverse(config, data)
                                                                            : run_burgers_ecfm(config, data);
      r.tables["data"] = burgers_data_table(config, data);
      return r;
    }
    case ExperimentKind::KppInv:
    case ExperimentKind::KppEcfm: {
      KppData data = generate_kpp_data(config);
      if (!config.data_file.empty()) {
        const CsvTable t = read_csv(config.data_file);
        if (t.rows.rows() != config.measurement_count || t.rows.cols() != 3) {
          throw SolverError(ErrorKind::ConfigError, "Fisher-KPP data must have C rows of x1,x2,v");
        }
        data.values = t.rows.col(2);
      }
      ExperimentReport r = config.experiment == ExperimentKind::KppInv ? run_kpp_inverse(config, data)
                                                                        : run_kpp_ecfm(config, data);
      r.tables["data"] = kpp_data_table(data);
      return r;
    }
    case ExperimentKind::BeamEcfm: {
      const MeasurementReplicates data = config.data_file.empty() ? generate_beam_data(config)
                                                                  : beam_data_from_table(read_csv(config.data_file));
      return run_beam_ecfm(config, data);
    }
  }
  throw SolverError(ErrorKind::ConfigError, "unhandled experiment");
}

std::filesystem::path write_report(const ExperimentConfig& config, const ExperimentReport& report) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%dT%H%M%SZ", &tm);
  const std::filesystem::path base = std::filesystem::path(config.output_dir) / to_string(config.experiment);
  std::filesystem::path dir = base / stamp;
  for (int k = 1; std::filesystem::exists(dir); ++k) dir = base / (std::string(stamp) + "-" + std::to_string(k));
  std::filesystem::create_directories(dir);
  json j = report_to_json(report);
  j["config"] = config_to_json(config);
  write_text(dir / "report.json", j.dump(2) + "\n");
  for (const auto& [name, table] : report.tables) write_csv(dir / (name + ".csv"), table);
  return dir;
}

}  // namespace ecfm
