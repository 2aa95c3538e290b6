#include "ecfm/experiments.hpp"
#include "ecfm/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace ecfm;
using nlohmann::json;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ecfm_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

ExperimentConfig small_burgers() {
  auto c = ExperimentConfig::defaults(ExperimentKind::BurgersInv);
  c.basis_count = 10;
  c.time_steps = 20;
  c.total_time = 0.4;
  return c;
}

bool rejects(const json& j) {
  try {
    parse_config(j).validate();
  } catch (const SolverError& e) {
    return e.kind() == ErrorKind::ConfigError;
  }
  return false;
}

}  // namespace

TEST_CASE("config parsing and validation") {
  const auto c = parse_config(json::parse(R"({"experiment": "kpp_inv", "discretization": {"N": 49}})"));
  CHECK(c.experiment == ExperimentKind::KppInv);
  CHECK(c.basis_count == 49);
  CHECK(c.measurement_count == 225);
  CHECK(config_to_json(parse_config(config_to_json(c))) == config_to_json(c));

  CHECK(rejects(json::parse(R"({"experiment": "burgers_inv", "physics": {"viscosity": 1}})")));
  CHECK(rejects(json::parse(R"({"experiment": "burgers_inv", "bogus": 1})")));
  CHECK(rejects(json::parse(R"({"experiment": "nope"})")));
  CHECK(rejects(json::parse(R"({"experiment": "beam_ecfm", "discretization": {"C": 0}})")));
  CHECK(rejects(json::parse(R"({"experiment": "burgers_ecfm", "noise": {"sigma": 0.1}})")));
  CHECK(rejects(json::parse(R"({"experiment": "kpp_ecfm", "noise": {"sigma": 0.0}})")));
  CHECK(rejects(json::parse(R"({"experiment": "kpp_inv", "discretization": {"N": 50}})")));
  CHECK(rejects(json::parse(R"({"experiment": "kpp_inv", "discretization": {"C": 200}})")));
  CHECK(rejects(json::parse(R"({"experiment": "burgers_inv", "discretization": {"N": "ten"}})")));
  CHECK_FALSE(rejects(json::parse(R"({"experiment": "burgers_ecfm"})")));
}

TEST_CASE("CSV round trip") {
  CsvTable t;
  t.header = {"x", "label, with comma", "say \"hi\""};
  t.rows = Matrix(2, 3);
  t.rows << 0.1, 1e-300, -2.5, 1.0 / 3.0, 7, 1e17;
  const auto text = to_csv(t);
  CHECK(text.find("\"label, with comma\"") != std::string::npos);
  CHECK(text.find("\"say \"\"hi\"\"\"") != std::string::npos);
  const auto back = parse_csv(text);
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK_THROWS_AS(parse_csv("a,b\n1,x\n"), SolverError);
  CHECK_THROWS_AS(parse_csv("a,b\n1\n"), SolverError);
}

TEST_CASE("report JSON round trip") {
  ExperimentReport r;
  r.experiment = "kpp_ecfm";
  r.status = "infeasible";
  r.message = "violated: mean_lower";
  r.recovered_params = {0.1, 1.0 / 3.0};
  r.objective_trace = {3, 2, 1};
  r.constraint_violation_trace = {0, 0, 1e-9};
  r.final_constraint_forces = {1e-12};
  r.error_metrics["field_relative_l1"] = 0.0123;
  r.diagnostics["iterations"] = 12;
  r.hessian_condition = 4.5;
  r.wall_time = 0.25;
  const json j = report_to_json(r);
  CHECK(report_to_json(report_from_json(j)) == j);
  r.hessian_condition.reset();
  CHECK_FALSE(report_from_json(report_to_json(r)).hessian_condition.has_value());
}

TEST_CASE("Hessian condition number on a known quadratic") {
  auto f = [](const Vector& x) { return 0.5 * (x(0) * x(0) + 4 * x(1) * x(1)); };
  CHECK(hessian_condition(f, Vector::Zero(2)) == doctest::Approx(4.0).epsilon(1e-6));
  auto g = [](const Vector& x) { return x(0) * x(0) + x(0) * x(1) + x(1) * x(1); };
  // eigenvalues of [[2,1],[1,2]] are 1 and 3
  CHECK(hessian_condition(g, (Vector(2) << 3.0, -2.0).finished()) == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("grid parsing") {
  const auto [a, b] = parse_grid("1:2:11,-0.5:0.5:3");
  CHECK(a.lo == 1.0);
  CHECK(a.hi == 2.0);
  CHECK(a.count == 11);
  CHECK(b.lo == -0.5);
  CHECK(b.count == 3);
  CHECK_THROWS_AS(parse_grid("1:2"), SolverError);
  CHECK_THROWS_AS(parse_grid("1:2:1,0:1:5"), SolverError);
  CHECK_THROWS_AS(parse_grid("2:1:4,0:1:5"), SolverError);
}

TEST_CASE("Burgers data starts at the initial condition") {
  auto c = small_burgers();
  const auto p = build_burgers(c);
  const Matrix data = generate_burgers_data(c);
  CHECK(data.rows() == 4);
  CHECK(data.cols() == 21);
  for (int i = 0; i < 4; ++i) {
    const double x = p.points[i];
    CHECK(std::abs(data(i, 0) - std::sin(2 * M_PI * x)) < 1e-12);
  }
  CHECK(std::pow(10.0, -1.75) == doctest::Approx(1.778e-2).epsilon(1e-3));
  const auto table = burgers_data_table(c, data);
  CHECK(burgers_data_from_table(c, table) == data);
}

TEST_CASE("Burgers objective vanishes at the truth") {
  auto c = small_burgers();
  const auto p = build_burgers(c);
  const Matrix data = generate_burgers_data(c);
  const Vector truth = Eigen::Map<const Vector>(c.true_eps.data(), 2);
  for (bool ecfm : {false, true}) {
    const auto v = burgers_objective(p, data, truth, ecfm);
    CHECK(v.value <= 1e-10);
  }
  CHECK(burgers_objective(p, data, (Vector(2) << 1.0, 0.5).finished(), false).value > 1e-4);
}

TEST_CASE("loss surface scan") {
  auto c = small_burgers();
  const Matrix data = generate_burgers_data(c);
  const auto surface = scan_loss_surface(c, data, {1.25, 2.25, 5}, {0.5, 1.5, 5}, 2);
  REQUIRE(surface.rows.rows() == 25);
  Eigen::Index best = 0;
  for (Eigen::Index r = 0; r < 25; ++r) {
    CHECK(surface.rows(r, 2) >= 0.0);
    if (surface.rows(r, 2) < surface.rows(best, 2)) best = r;
  }
  CHECK(surface.rows(best, 0) == doctest::Approx(1.75));
  CHECK(surface.rows(best, 1) == doctest::Approx(1.0));
  const auto again = scan_loss_surface(c, data, {1.25, 2.25, 5}, {0.5, 1.5, 5}, 1);
  CHECK(again.rows == surface.rows);
}

TEST_CASE("Fisher-KPP truth data") {
  auto c = ExperimentConfig::defaults(ExperimentKind::KppInv);
  const auto p = build_kpp(c);
  CHECK(kpp_truth_source(c, {0.5, 0.5}) == 100.0);
  CHECK(kpp_truth_source(c, {0.1, 0.5}) == 0.0);
  const Vector load = assemble_load_2d(
      p.basis, [&](Point2 x) { return kpp_truth_source(c, x); }, {0.0, 0.25, 0.75, 1.0});
  for (int k = 1; k <= p.basis.count(); ++k) {
    const auto [a, b] = p.basis.tensor_mode(k);
    auto axis = [](int m) { return (std::cos(m * M_PI / 4) - std::cos(3 * m * M_PI / 4)) / (m * M_PI); };
    CHECK(std::abs(load(k - 1) - 100.0 * axis(a) * axis(b)) < 1e-10);
  }

  const auto d = generate_kpp_data(c);
  for (int k = 1; k <= p.basis.count(); ++k) {
    const auto [a, b] = p.basis.tensor_mode(k);
    const int swapped = (b - 1) * p.basis.per_axis() + a;
    CHECK(std::abs(d.truth_theta(k - 1) - d.truth_theta(swapped - 1)) < 1e-9 * d.truth_theta.norm());
  }
  const Vector noise = d.values - d.clean;
  CHECK((noise - sample_noise(NoiseModel{c.sigma, c.seed}, c.measurement_count)).norm() < 1e-12);

  auto noisy = ExperimentConfig::defaults(ExperimentKind::KppEcfm);
  const auto dn = generate_kpp_data(noisy);
  CHECK((dn.clean - d.clean).norm() < 1e-12);
  CHECK((dn.values - dn.clean - sample_noise(NoiseModel{noisy.sigma, noisy.seed}, 225)).norm() < 1e-12);
}

TEST_CASE("beam ECFM optimum is locally optimal") {
  auto c = ExperimentConfig::defaults(ExperimentKind::BeamEcfm);
  const auto data = generate_beam_data(c);
  CHECK(data.replicates() == 25);
  CHECK(beam_data_from_table(beam_data_table(data)).values == data.values);
  const auto report = run_beam_ecfm(c, data);
  REQUIRE(report.status == "ok");
  const auto ops = build_beam(c, c.basis_count);
  const auto gram = stochastic_gramian(BasisFamily::shifted_legendre(c.model_count));
  const int nc = c.measurement_count;
  Vector x = Vector::Zero(1 + nc);
  x(0) = report.recovered_params[0];
  const double best = beam_likelihood(ops, gram, data, x).value;
  for (double dx : {-0.2, 0.2}) {
    Vector y = x;
    y(0) += dx;
    CHECK(beam_likelihood(ops, gram, data, y).value > best);
  }
}

TEST_CASE("reports are reproducible") {
  auto c = ExperimentConfig::defaults(ExperimentKind::BeamEcfm);
  c.output_dir = scratch_dir("repro").string();
  const auto d1 = write_report(c, run_experiment(c));
  const auto d2 = write_report(c, run_experiment(c));
  CHECK(d1 != d2);
  auto strip = [](const std::filesystem::path& dir) {
    json j = json::parse(read_text(dir / "report.json"));
    j.erase("wall_time");
    return j.dump();
  };
  CHECK(strip(d1) == strip(d2));
  for (const auto& entry : std::filesystem::directory_iterator(d1)) {
    if (entry.path().extension() != ".csv") continue;
    CHECK(read_text(entry.path()) == read_text(d2 / entry.path().filename()));
  }
  CHECK(std::filesystem::exists(d1 / "trace.csv"));
  std::filesystem::remove_all(c.output_dir);
}
