#include "ecfm/sensitivity.hpp"

#include <doctest.h>

#include "helpers.hpp"

#include <cmath>
#include <random>

using namespace ecfm;

namespace {

struct Setup {
  DiscreteOperatorSet ops;
  TimeGrid grid;
  Vector theta0;
};

Setup burgers(int n, int steps, double total) {
  const auto basis = BasisFamily::sine_1d(n);
  Setup s{assemble_burgers(basis, BasisFamily::hat_1d(0.2), {0.2, 0.4, 0.6, 0.8},
                           [](double x, double t) { return std::sin(2 * M_PI * x) * std::sin(2 * M_PI * t); },
                           TimeGrid{total, steps}),
          TimeGrid{total, steps},
          {}};
  s.theta0 = project_initial_condition(s.ops.mass,
                                       assemble_load_1d(basis, [](double x) { return std::sin(2 * M_PI * x); }));
  return s;
}

Vector eps2(double a, double b) {
  Vector e(2);
  e << a, b;
  return e;
}

}  // namespace

TEST_CASE("standard sensitivities against central differences of the trajectory") {
  auto s = burgers(20, 40, 1.0);
  const Vector e = eps2(1.6, 0.9);
  const auto tr = march_burgers_standard(s.ops, s.grid, e, s.theta0);
  const auto sens = march_sensitivity_standard(s.ops, s.grid, e, tr);
  CHECK(sens.dtheta[0].row(0).norm() == 0.0);
  CHECK(sens.dtheta[1].row(0).norm() == 0.0);
  const double d = 1e-4;
  for (int p = 0; p < 2; ++p) {
    Vector a = e, b = e;
    a(p) += d;
    b(p) -= d;
    const Matrix fd = (march_burgers_standard(s.ops, s.grid, a, s.theta0).theta -
                       march_burgers_standard(s.ops, s.grid, b, s.theta0).theta) /
                      (2 * d);
    CHECK(testing::rel_err(sens.dtheta[p].row(40), fd.row(40)) < 1e-3);
  }
}

TEST_CASE("pure mass dynamics have no viscosity sensitivity") {
  auto s = burgers(6, 10, 1.0);
  s.ops.stiffness.setZero();
  s.ops.advection = Tensor3(6, 6, 6);
  const Vector e = eps2(1.0, 1.0);
  const auto tr = march_burgers_standard(s.ops, s.grid, e, s.theta0);
  const auto sens = march_sensitivity_standard(s.ops, s.grid, e, tr);
  CHECK(sens.dtheta[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("linear case: source sensitivity is the unit-source trajectory") {
  auto s = burgers(8, 20, 1.0);
  s.ops.advection = Tensor3(8, 8, 8);
  const Vector e = eps2(1.0, 0.7);
  const auto tr = march_burgers_standard(s.ops, s.grid, e, s.theta0);
  const auto sens = march_sensitivity_standard(s.ops, s.grid, e, tr);
  const auto unit = march_burgers_standard(s.ops, s.grid, eps2(1.0, 1.0), Vector::Zero(8));
  CHECK(testing::rel_err(sens.dtheta[1], unit.theta) < 1e-10);
}

TEST_CASE("objective gradients match finite differences at the full discretization") {
  auto s = burgers(50, 100, 2.0);
  const Matrix data = s.ops.measurement * march_burgers_standard(s.ops, s.grid, eps2(1.75, 1.0), s.theta0).theta.transpose();
  const double dt = s.grid.dt();
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> u1(1.0, 2.5), u2(0.5, 1.5);
  for (int trial = 0; trial < 4; ++trial) {
    const Vector e = eps2(u1(gen), u2(gen));
    const auto tr = march_burgers_standard(s.ops, s.grid, e, s.theta0);
    const Vector g = grad_objective_standard(s.ops, tr, march_sensitivity_standard(s.ops, s.grid, e, tr), data, dt);
    const Vector fd = testing::central_gradient(
        [&](const Vector& x) { return objective_standard(s.ops, march_burgers_standard(s.ops, s.grid, x, s.theta0), data, dt); },
        e, 1e-4);
    CHECK(testing::rel_err(g, fd) < 1e-3);

    const auto te = march_burgers_ecfm(s.ops, s.grid, e, s.theta0, data);
    const Vector ge = grad_objective_ecfm(te, march_sensitivity_ecfm(s.ops, s.grid, e, te), dt);
    const Vector fde = testing::central_gradient(
        [&](const Vector& x) { return objective_ecfm(march_burgers_ecfm(s.ops, s.grid, x, s.theta0, data), dt); }, e,
        1e-4);
    CHECK(testing::rel_err(ge, fde) < 1e-3);
  }
}

TEST_CASE("ECFM sensitivities keep the data constraint and match differences of lambda") {
  auto s = burgers(20, 30, 1.0);
  const Vector truth = eps2(1.75, 1.0);
  const Matrix data = s.ops.measurement * march_burgers_standard(s.ops, s.grid, truth, s.theta0).theta.transpose();
  const auto tr = march_burgers_ecfm(s.ops, s.grid, truth, s.theta0, data);
  const auto sens = march_sensitivity_ecfm(s.ops, s.grid, truth, tr);
  REQUIRE(sens.dlambda.has_value());
  const double d = 1e-4;
  for (int p = 0; p < 2; ++p) {
    CHECK((s.ops.measurement * sens.dtheta[p].transpose()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((*sens.dlambda)[p].row(0).norm() == 0.0);
    Vector a = truth, b = truth;
    a(p) += d;
    b(p) -= d;
    const Matrix fd = (*march_burgers_ecfm(s.ops, s.grid, a, s.theta0, data).lambda -
                       *march_burgers_ecfm(s.ops, s.grid, b, s.theta0, data).lambda) /
                      (2 * d);
    CHECK(testing::rel_err((*sens.dlambda)[p], fd) < 1e-3);
  }
}

TEST_CASE("ECFM sensitivity with no constraints is the standard sensitivity") {
  auto s = burgers(10, 10, 0.5);
  s.ops.constraint = Matrix::Zero(10, 0);
  s.ops.measurement = Matrix::Zero(0, 10);
  const Vector e = eps2(1.4, 0.8);
  const auto tr = march_burgers_standard(s.ops, s.grid, e, s.theta0);
  const auto te = march_burgers_ecfm(s.ops, s.grid, e, s.theta0, Matrix::Zero(0, 11));
  const auto a = march_sensitivity_standard(s.ops, s.grid, e, tr);
  const auto b = march_sensitivity_ecfm(s.ops, s.grid, e, te);
  CHECK(testing::rel_err(a.dtheta[0], b.dtheta[0]) < 1e-12);
  CHECK(testing::rel_err(a.dtheta[1], b.dtheta[1]) < 1e-12);
}

TEST_CASE("gradients vanish at exact fit and scale with dt") {
  auto s = burgers(12, 20, 1.0);
  const Vector e = eps2(1.75, 1.0);
  NewtonConfig tight;
  tight.tol = 1e-13;
  const auto tr = march_burgers_standard(s.ops, s.grid, e, s.theta0, tight);
  const Matrix data = s.ops.measurement * tr.theta.transpose();
  const auto sens = march_sensitivity_standard(s.ops, s.grid, e, tr);
  CHECK(grad_objective_standard(s.ops, tr, sens, data, 0.05).norm() == 0.0);

  const Matrix shifted = data.array() + 0.1;
  const Vector g1 = grad_objective_standard(s.ops, tr, sens, shifted, 0.05);
  const Vector g2 = grad_objective_standard(s.ops, tr, sens, shifted, 0.1);
  CHECK(testing::rel_err(g2, Vector(2.0 * g1)) < 1e-14);

  const auto te = march_burgers_ecfm(s.ops, s.grid, e, s.theta0, data, tight);
  const auto se = march_sensitivity_ecfm(s.ops, s.grid, e, te);
  CHECK(grad_objective_ecfm(te, se, 0.05).norm() < 1e-8);
}

TEST_CASE("ECFM source-gradient sign follows the data in the linear case") {
  auto s = burgers(10, 20, 1.0);
  s.ops.advection = Tensor3(10, 10, 10);
  const Vector e = eps2(1.0, 1.0);
  for (double truth2 : {0.5, 1.5}) {
    const Matrix data =
        s.ops.measurement * march_burgers_standard(s.ops, s.grid, eps2(1.0, truth2), s.theta0).theta.transpose();
    const auto te = march_burgers_ecfm(s.ops, s.grid, e, s.theta0, data);
    const Vector g = grad_objective_ecfm(te, march_sensitivity_ecfm(s.ops, s.grid, e, te), s.grid.dt());
    // descent moves eps2 towards the data-generating value
    if (truth2 > 1.0) CHECK(g(1) < 0.0);
    else CHECK(g(1) > 0.0);
  }
}

TEST_CASE("sensitivity sweep is idempotent") {
  auto s = burgers(12, 15, 1.0);
  const Vector e = eps2(1.5, 0.9);
  const auto tr = march_burgers_standard(s.ops, s.grid, e, s.theta0);
  const auto a = march_sensitivity_standard(s.ops, s.grid, e, tr);
  const auto b = march_sensitivity_standard(s.ops, s.grid, e, march_burgers_standard(s.ops, s.grid, e, s.theta0));
  CHECK(a.dtheta[0] == b.dtheta[0]);
  CHECK(a.dtheta[1] == b.dtheta[1]);
}
