#include "ecfm/verify.hpp"

#include "ecfm/experiments.hpp"
#include "ecfm/sensitivity.hpp"
#include "ecfm/stats.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace ecfm {

namespace {

// Largest entrywise mismatch between g and a central-difference gradient,
// relative to max(|g|_inf, floor).
double fd_mismatch(const std::function<double(const Vector&)>& f, const Vector& x, const Vector& g, double h,
                   double floor) {
  Vector fd(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a(i) += h;
    b(i) -= h;
    fd(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return (fd - g).cwiseAbs().maxCoeff() / std::max(g.cwiseAbs().maxCoeff(), floor);
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

CheckResult check(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  CheckResult r{name, false, ""};
  try {
    auto [ok, detail] = body();
    r.passed = ok;
    r.detail = detail;
  } catch (const std::exception& e) {
    r.detail = std::string("exception: ") + e.what();
  }
  return r;
}

}  // namespace

std::vector<CheckResult> run_invariant_checks() {
  std::vector<CheckResult> out;

  out.push_back(check("quantiles", [] {
    const double z = normal_quantile(0.025);
    const double lo = chi2_quantile(0.025, 224);
    const double hi = chi2_quantile(0.975, 224);
    const bool ok = std::abs(z + 1.96) <= 0.05 && std::abs(lo - 184.44) <= 0.05 && std::abs(hi - 267.35) <= 0.05;
    return std::make_pair(ok, "z=" + fmt(z) + " chi2=(" + fmt(lo) + ", " + fmt(hi) + ")");
  }));

  auto cfg_inv = ExperimentConfig::defaults(ExperimentKind::BurgersInv);
  cfg_inv.time_steps = 20;
  cfg_inv.total_time = 0.4;
  cfg_inv.basis_count = 20;

  out.push_back(check("burgers_gradients", [&] {
    const BurgersProblem p = build_burgers(cfg_inv);
    const Matrix data = generate_burgers_data(cfg_inv);
    Vector e(2);
    e << 1.4, 0.7;
    double worst = 0.0;
    for (bool ecfm : {false, true}) {
      const ValueAndGradient vg = burgers_objective(p, data, e, ecfm, cfg_inv.newton);
      auto f = [&](const Vector& x) { return burgers_objective(p, data, x, ecfm, cfg_inv.newton).value; };
      worst = std::max(worst, fd_mismatch(f, e, vg.gradient, 1e-5, 1e-12));
    }
    return std::make_pair(worst <= 1e-3, "max rel mismatch " + fmt(worst));
  }));

  out.push_back(check("burgers_data_deterministic", [&] {
    const Matrix a = generate_burgers_data(cfg_inv);
    const Matrix b = generate_burgers_data(cfg_inv);
    return std::make_pair(a == b, std::string(a == b ? "identical" : "differs"));
  }));

  out.push_back(check("burgers_ecfm_consistent", [&] {
    const BurgersProblem p = build_burgers(cfg_inv);
    const Matrix data = generate_burgers_data(cfg_inv);
    Vector e(2);
    e << cfg_inv.true_eps[0], cfg_inv.true_eps[1];
    const Trajectory tr = march_burgers_ecfm(p.ops, p.grid, e, p.theta0, data, cfg_inv.newton);
    const double ratio = tr.lambda->norm() / data.norm();
    return std::make_pair(ratio <= 1e-6, "|lambda|/|data| = " + fmt(ratio));
  }));

  out.push_back(check("kpp_jacobian", [] {
    auto cfg = ExperimentConfig::defaults(ExperimentKind::KppInv);
    cfg.basis_count = 16;
    cfg.model_count = 4;
    cfg.measurement_count = 9;
    const KppProblem p = build_kpp(cfg);
    Vector th = Vector::LinSpaced(16, 0.3, -0.2);
    Vector eps = Vector::Constant(4, 5.0);
    const Matrix j = residual_kpp_jac(p.ops, th);
    double worst = 0.0;
    for (int k = 0; k < 16; ++k) {
      Vector a = th, b = th;
      a(k) += 1e-6;
      b(k) -= 1e-6;
      const Vector col = (residual_kpp(p.ops, a, eps) - residual_kpp(p.ops, b, eps)) / 2e-6;
      worst = std::max(worst, (col - j.col(k)).cwiseAbs().maxCoeff() / j.cwiseAbs().maxCoeff());
    }
    return std::make_pair(worst <= 1e-3, "max rel mismatch " + fmt(worst));
  }));

  out.push_back(check("beam_likelihood_gradient", [] {
    const auto cfg = ExperimentConfig::defaults(ExperimentKind::BeamEcfm);
    const BeamOperatorSet ops = build_beam(cfg, cfg.basis_count);
    const StochasticGramian gram = stochastic_gramian(BasisFamily::shifted_legendre(cfg.model_count));
    const MeasurementReplicates data = generate_beam_data(cfg);
    Vector x(ops.constraints() + 1);
    x << 0.8, Vector::LinSpaced(ops.constraints(), -1.0, 1.0);
    const ValueAndGradient vg = beam_likelihood(ops, gram, data, x);
    auto f = [&](const Vector& y) { return beam_likelihood(ops, gram, data, y).value; };
    const double worst = fd_mismatch(f, x, vg.gradient, 1e-5, 1e-8);
    return std::make_pair(worst <= 1e-3, "max rel mismatch " + fmt(worst));
  }));

  out.push_back(check("beam_critical_load", [] {
    const auto cfg = ExperimentConfig::defaults(ExperimentKind::BeamEcfm);
    const double b = critical_load(build_beam(cfg, cfg.basis_count), 1.0);
    return std::make_pair(std::abs(b - kBeamTargetCriticalLoad) <= 0.05, "beta_crit(1) = " + fmt(b));
  }));

  out.push_back(check("report_roundtrip", [] {
    ExperimentReport r;
    r.experiment = "burgers_inv";
    r.status = "ok";
    r.recovered_params = {1.75, 0.1 + 0.2};
    r.objective_trace = {3.0, 1.0 / 3.0};
    r.error_metrics["x"] = 1e-17;
    r.hessian_condition = 8.11;
    r.wall_time = 0.5;
    const ExperimentReport back = report_from_json(nlohmann::json::parse(report_to_json(r).dump()));
    const bool ok = report_to_json(back) == report_to_json(r);
    return std::make_pair(ok, std::string(ok ? "lossless" : "mismatch"));
  }));

  return out;
}

}  // namespace ecfm
