#include "ecfm/pce.hpp"
#include "ecfm/stats.hpp"

#include <doctest.h>

#include "helpers.hpp"

#include <cmath>

using namespace ecfm;

namespace {

BeamOperatorSet small_beam(int n, StiffnessFn stiffness = beam_defect_stiffness(3.0)) {
  return assemble_beam(BasisFamily::clamped_beam_sine(n), stiffness, 3.0, [](double) { return 100.0; },
                       BasisFamily::hat_1d(0.25), {0.25, 0.5, 0.75}, {0.0, 0.5, 1.0});
}

MeasurementReplicates fake_replicates(int c, int d, std::uint64_t seed, double scale) {
  MeasurementReplicates r;
  r.points = {0.25, 0.5, 0.75};
  r.points.resize(c);
  Rng rng(seed);
  r.values.resize(c, d);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < d; ++j) r.values(i, j) = scale * (1.0 + 0.3 * rng.normal());
  return r;
}

double likelihood_at(const BeamOperatorSet& ops, const StochasticGramian& gram, double eps, const Vector& lambda,
                     const MeasurementReplicates& data) {
  const auto sol = solve_stochastic_galerkin(ops, gram, eps, lambda);
  const auto m = moments(sol.coefficients.theta, ops.measurement, gram);
  return pseudo_log_likelihood(m.mean, m.variance, data).value;
}

}  // namespace

TEST_CASE("stochastic Gramian matches quadrature") {
  const auto psi = BasisFamily::shifted_legendre(6);
  const auto gram = stochastic_gramian(psi);
  const auto rule = gauss_legendre(12, 1);
  for (int k = 0; k < 6; ++k) {
    const double g0 = integrate(rule, [&](double w) { return eval_basis(psi, k + 1, w); });
    CHECK(std::abs(gram.g0(k) - g0) < 1e-13);
    for (int q = 0; q < 6; ++q) {
      const double g1 =
          integrate(rule, [&](double w) { return w * eval_basis(psi, k + 1, w) * eval_basis(psi, q + 1, w); });
      const double g2 = integrate(rule, [&](double w) { return eval_basis(psi, k + 1, w) * eval_basis(psi, q + 1, w); });
      CHECK(std::abs(gram.g1(k, q) - g1) < 1e-13);
      CHECK(std::abs(gram.g2(k, q) - g2) < 1e-13);
    }
  }
  CHECK(std::abs(gram.g0(0) - 1.0) < 1e-15);
  CHECK(gram.g2(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(stochastic_gramian(BasisFamily::sine_1d(3)), SolverError);
}

TEST_CASE("one stochastic mode reproduces the averaged deterministic solve") {
  const auto ops = small_beam(5);
  const auto gram = stochastic_gramian(BasisFamily::shifted_legendre(1));
  const double eps = 0.2 * critical_load(ops, 1.0);
  const Vector lambda = (Vector(3) << 0.5, -1.0, 2.0).finished();
  const auto sol = solve_stochastic_galerkin(ops, gram, eps, lambda);
  // H is affine in omega, so E[K^B] = K^B(1/2)
  const Vector det = solve_beam_deterministic(ops, 0.5, eps, lambda);
  CHECK((sol.coefficients.theta.col(0) - det).norm() <= 1e-10 * det.norm());
}

TEST_CASE("omega-independent stiffness leaves higher modes empty") {
  const auto ops = small_beam(5, [](double, double) { return 3.0; });
  const auto gram = stochastic_gramian(BasisFamily::shifted_legendre(4));
  const double eps = 0.3 * critical_load(ops, 0.0);
  const auto sol = solve_stochastic_galerkin(ops, gram, eps, Vector::Zero(3));
  const Matrix& th = sol.coefficients.theta;
  CHECK(th.rightCols(3).cwiseAbs().maxCoeff() <= 1e-12 * th.col(0).norm());
  const auto m = moments(th, ops.measurement, gram);
  CHECK(m.variance.cwiseAbs().maxCoeff() < 1e-10 * m.mean.squaredNorm());
}

TEST_CASE("PCE converges to deterministic solves as the expansion grows") {
  const auto ops = small_beam(5);
  const double eps = 0.3 * critical_load(ops, 1.0);
  double prev = 1e300;
  for (int m : {2, 4, 6}) {
    const auto psi = BasisFamily::shifted_legendre(m);
    const auto sol = solve_stochastic_galerkin(ops, stochastic_gramian(psi), eps, Vector::Zero(3));
    double err = 0.0;
    for (double w : {0.05, 0.3, 0.5, 0.7, 0.95}) {
      const Vector det = solve_beam_deterministic(ops, w, eps, Vector::Zero(3));
      err = std::max(err, (sol.coefficients.at(psi, w) - det).norm() / det.norm());
    }
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("prediction moments") {
  const auto gram = stochastic_gramian(BasisFamily::shifted_legendre(3));
  Matrix theta = Matrix::Zero(2, 3);
  theta(0, 1) = 1.0;
  auto m = moments(theta, Matrix::Identity(2, 2), gram);
  CHECK(std::abs(m.mean(0)) < 1e-15);
  CHECK(m.variance(0) == doctest::Approx(1.0 / 3.0));
  CHECK(std::abs(m.variance(1)) < 1e-15);

  // Monte Carlo oracle on a random expansion
  const auto psi = BasisFamily::shifted_legendre(4);
  const auto g4 = stochastic_gramian(psi);
  const Matrix th = testing::random_vector(12, 5).reshaped(3, 4);
  const Matrix meas = testing::random_vector(6, 6).reshaped(2, 3);
  m = moments(th, meas, g4);
  const int n = 200000;
  const Vector u = sample_uniform(17, n);
  Matrix draws(2, n);
  for (int s = 0; s < n; ++s) draws.col(s) = meas * (th * stochastic_values(psi, u(s)));
  for (int i = 0; i < 2; ++i) {
    const auto sm = sample_moments(draws.row(i).transpose());
    const double se = std::sqrt(sm.variance / n);
    CHECK(std::abs(sm.mean - m.mean(i)) < 3 * se);
    CHECK(std::abs(sm.variance - m.variance(i)) < 0.02 * m.variance(i));
  }
}

TEST_CASE("pseudo likelihood values") {
  MeasurementReplicates data;
  data.points = {0.5};
  data.values = (Matrix(1, 2) << 1.0, -1.0).finished();
  auto v = pseudo_log_likelihood(Vector::Zero(1), Vector::Ones(1), data);
  CHECK(v.value == doctest::Approx(std::log(2 * M_PI) + 1.0).epsilon(1e-12));
  CHECK_FALSE(v.floored);

  // sample mean and biased sample variance minimize the likelihood
  const auto rep = fake_replicates(3, 8, 2, 1.0);
  const Vector mu = rep.values.rowwise().mean();
  const Vector s2 = (rep.values.colwise() - mu).array().square().rowwise().mean();
  const double best = pseudo_log_likelihood(mu, s2, rep).value;
  CHECK(best == doctest::Approx((0.5 * 8 * ((2 * M_PI * s2.array()).log() + 1.0)).sum()).epsilon(1e-12));
  for (double dm : {-0.01, 0.01}) {
    CHECK(pseudo_log_likelihood(mu.array() + dm, s2, rep).value > best);
    CHECK(pseudo_log_likelihood(mu, s2 * (1 + dm), rep).value > best);
  }

  // permuting replicates changes nothing
  MeasurementReplicates perm = rep;
  perm.values.col(0).swap(perm.values.col(5));
  CHECK(pseudo_log_likelihood(mu, s2, perm).value == doctest::Approx(best).epsilon(1e-14));

  v = pseudo_log_likelihood(Vector::Zero(1), Vector::Zero(1), data);
  CHECK(v.floored);
  CHECK(std::isfinite(v.value));
  CHECK_THROWS_AS(pseudo_log_likelihood(Vector::Zero(2), Vector::Ones(2), data), SolverError);
}

TEST_CASE("likelihood gradient against finite differences") {
  const auto ops = small_beam(5);
  const auto gram = stochastic_gramian(BasisFamily::shifted_legendre(4));
  const double bc = critical_load(ops, 1.0);
  const Vector lambda = (Vector(3) << 0.3, -0.2, 0.1).finished();
  const auto sol0 = solve_stochastic_galerkin(ops, gram, 0.3 * bc, lambda);
  const Vector mean0 = ops.measurement * sol0.coefficients.theta * gram.g0;
  MeasurementReplicates data = fake_replicates(3, 12, 4, 1.0);
  for (int i = 0; i < 3; ++i) data.values.row(i) *= mean0(i);

  for (double frac : {0.2, 0.45}) {
    const double eps = frac * bc;
    const auto sol = solve_stochastic_galerkin(ops, gram, eps, lambda);
    const auto sens = stochastic_sensitivity(sol, ops, gram);
    const auto g = grad_pseudo_likelihood(sol.coefficients.theta, gram, ops.measurement, data, sens);
    const double h = 1e-6 * bc;
    const double fd_eps =
        (likelihood_at(ops, gram, eps + h, lambda, data) - likelihood_at(ops, gram, eps - h, lambda, data)) / (2 * h);
    CHECK(std::abs(g.d_eps - fd_eps) <= 1e-5 * std::max(1.0, std::abs(fd_eps)));
    const Vector fd_l = testing::central_gradient(
        [&](const Vector& l) { return likelihood_at(ops, gram, eps, l, data); }, lambda, 1e-5);
    CHECK((g.d_lambda - fd_l).norm() <= 1e-5 * std::max(1.0, fd_l.norm()));
  }
}

TEST_CASE("stochastic sensitivities") {
  const auto ops = small_beam(4);
  const auto gram = stochastic_gramian(BasisFamily::shifted_legendre(3));
  const double eps = 0.3 * critical_load(ops, 1.0);
  const auto sol = solve_stochastic_galerkin(ops, gram, eps, Vector::Zero(3));
  const auto sens = stochastic_sensitivity(sol, ops, gram);
  const double h = 1e-6 * eps;
  const Matrix fd = (solve_stochastic_galerkin(ops, gram, eps + h, Vector::Zero(3)).coefficients.theta -
                     solve_stochastic_galerkin(ops, gram, eps - h, Vector::Zero(3)).coefficients.theta) /
                    (2 * h);
  CHECK((sens.dtheta_deps - fd).norm() <= 1e-6 * fd.norm());
  // theta is affine in lambda: the derivative is the exact difference
  for (int j = 0; j < 3; ++j) {
    Vector l = Vector::Zero(3);
    l(j) = 1.0;
    const Matrix diff = solve_stochastic_galerkin(ops, gram, eps, l).coefficients.theta - sol.coefficients.theta;
    CHECK((sens.dtheta_dlambda[j] - diff).norm() <= 1e-10 * std::max(1.0, diff.norm()));
  }

  // no constraint forcing: dtheta/dlambda vanishes
  auto zero = ops;
  zero.constraint.setZero();
  const auto zsol = solve_stochastic_galerkin(zero, gram, eps, Vector::Zero(3));
  const auto zsens = stochastic_sensitivity(zsol, zero, gram);
  for (const auto& m : zsens.dtheta_dlambda) CHECK(m.norm() == 0.0);
}

TEST_CASE("critical load") {
  const auto ops = small_beam(6);
  const double b0 = critical_load(ops, 0.0);
  const double b1 = critical_load(ops, 1.0);
  CHECK(b0 >= b1);
  for (double w : {0.0, 0.5, 1.0}) {
    const double bc = critical_load(ops, w);
    Eigen::SelfAdjointEigenSolver<Matrix> below(ops.effective_stiffness(w, bc * (1 - 1e-6)));
    Eigen::SelfAdjointEigenSolver<Matrix> above(ops.effective_stiffness(w, bc * (1 + 1e-6)));
    CHECK(below.eigenvalues().minCoeff() > 0.0);
    CHECK(above.eigenvalues().minCoeff() < 0.0);
  }
  CHECK_THROWS_AS(solve_beam_deterministic(ops, 1.0, 1.01 * b1, Vector::Zero(3)), SolverError);
  CHECK_THROWS_AS(solve_stochastic_galerkin(ops, stochastic_gramian(BasisFamily::shifted_legendre(3)), 1.01 * b0,
                                            Vector::Zero(3)),
                  SolverError);
}
