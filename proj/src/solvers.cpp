#include "ecfm/solvers.hpp"

#include <cmath>
#include <string>

namespace ecfm {

void NewtonConfig::validate() const {
  if (!(tol > 0.0) || max_iters < 1) {
    throw SolverError(ErrorKind::InvalidArgument, "Newton needs tol > 0 and max_iters >= 1");
  }
}

NewtonResult newton_solve(const ResidualFn& residual, const JacobianFn& jacobian, const Vector& initial_guess,
                          const NewtonConfig& config) {
  config.validate();
  NewtonResult result;
  result.x = initial_guess;
  Vector r = residual(result.x);
  result.residual_norm = r.norm();
  int increases = 0;
  while (!(result.residual_norm < config.tol)) {
    if (result.iterations >= config.max_iters) {
      throw SolverError(ErrorKind::MaxItersExceeded,
                        "Newton: residual " + std::to_string(result.residual_norm) + " after " +
                            std::to_string(config.max_iters) + " iterations");
    }
    if (!std::isfinite(result.residual_norm)) {
      throw SolverError(ErrorKind::Diverged, "Newton: non-finite residual");
    }
    const LuFactor lu(jacobian(result.x));
    if (lu.singular()) {
      throw SolverError(ErrorKind::SingularJacobian,
                        "Newton: singular Jacobian at iteration " + std::to_string(result.iterations));
    }
    result.x -= lu.solve(r);
    ++result.iterations;
    r = residual(result.x);
    const double norm = r.norm();
    increases = norm > result.residual_norm ? increases + 1 : 0;
    result.residual_norm = norm;
    if (increases >= config.divergence_window) {
      throw SolverError(ErrorKind::Diverged, "Newton: residual grew for " + std::to_string(increases) +
                                                 " consecutive iterations");
    }
  }
  return result;
}

Vector project_initial_condition(const Matrix& mass, const Vector& load) { return lu_solve(mass, load); }

Matrix augmented_jacobian(const Matrix& jac, const Matrix& constraint, const Matrix& measurement) {
  const Eigen::Index n = jac.rows();
  const Eigen::Index c = measurement.rows();
  Matrix aug = Matrix::Zero(n + c, n + c);
  aug.topLeftCorner(n, n) = jac;
  aug.topRightCorner(n, c) = -constraint;
  aug.bottomLeftCorner(c, n) = measurement;
  return aug;
}

namespace {

SolverError annotate(const SolverError& e, int step) {
  return SolverError(e.kind(), "step " + std::to_string(step) + ": " + e.what());
}

}  // namespace

Trajectory march_burgers_standard(const DiscreteOperatorSet& ops, const TimeGrid& grid, const Vector& eps,
                                  const Vector& theta0, const NewtonConfig& config) {
  grid.validate();
  const int n = ops.size();
  if (theta0.size() != n) throw SolverError(ErrorKind::DimensionMismatch, "initial state size mismatch");
  if (ops.source.cols() < grid.steps + 1) {
    throw SolverError(ErrorKind::DimensionMismatch, "operators assembled on a shorter time grid");
  }
  const double dt = grid.dt();
  Trajectory traj;
  traj.theta.resize(grid.steps + 1, n);
  traj.theta.row(0) = theta0.transpose();
  Vector prev = theta0;
  for (int step = 1; step <= grid.steps; ++step) {
    auto residual = [&](const Vector& th) { return residual_burgers(ops, th, prev, dt, eps, step); };
    auto jacobian = [&](const Vector& th) { return residual_burgers_jac(ops, th, dt, eps); };
    NewtonResult res;
    try {
      res = newton_solve(residual, jacobian, prev, config);
    } catch (const SolverError& e) {
      throw annotate(e, step);
    }
    traj.theta.row(step) = res.x.transpose();
    traj.newton_iterations.push_back(res.iterations);
    prev = res.x;
  }
  return traj;
}

Trajectory march_burgers_ecfm(const DiscreteOperatorSet& ops, const TimeGrid& grid, const Vector& eps,
                              const Vector& theta0, const Matrix& data, const NewtonConfig& config) {
  grid.validate();
  const int n = ops.size();
  const int c = ops.constraints();
  if (theta0.size() != n) throw SolverError(ErrorKind::DimensionMismatch, "initial state size mismatch");
  if (data.rows() != c || data.cols() < grid.steps + 1) {
    throw SolverError(ErrorKind::DimensionMismatch, "data must be C x (P+1)");
  }
  if (c > n) {
    throw SolverError(ErrorKind::SingularJacobian, "augmented system singular: more constraints than unknowns");
  }
  const double mismatch = c > 0 ? (ops.measurement * theta0 - data.col(0)).cwiseAbs().maxCoeff() : 0.0;
  if (mismatch > std::max(10.0 * config.tol, 1e-8 * data.col(0).norm())) {
    throw SolverError(ErrorKind::InconsistentInitialData,
                      "initial measurements disagree with the initial condition by " + std::to_string(mismatch));
  }
  const double dt = grid.dt();
  Trajectory traj;
  traj.theta.resize(grid.steps + 1, n);
  traj.lambda = Matrix::Zero(grid.steps + 1, c);
  traj.theta.row(0) = theta0.transpose();
  Vector state(n + c);
  state << theta0, Vector::Zero(c);
  Vector prev = theta0;
  for (int step = 1; step <= grid.steps; ++step) {
    auto residual = [&](const Vector& z) {
      Vector r(n + c);
      r.head(n) = residual_burgers(ops, z.head(n), prev, dt, eps, step, Vector(z.tail(c)));
      r.tail(c) = ops.measurement * z.head(n) - data.col(step);
      return r;
    };
    auto jacobian = [&](const Vector& z) {
      return augmented_jacobian(residual_burgers_jac(ops, z.head(n), dt, eps), ops.constraint, ops.measurement);
    };
    NewtonResult res;
    try {
      res = newton_solve(residual, jacobian, state, config);
    } catch (const SolverError& e) {
      throw annotate(e, step);
    }
    state = res.x;
    prev = state.head(n);
    traj.theta.row(step) = prev.transpose();
    traj.lambda->row(step) = state.tail(c).transpose();
    traj.newton_iterations.push_back(res.iterations);
  }
  return traj;
}

Vector solve_kpp_equilibrium(const DiscreteOperatorSet& ops, const Vector& eps, const Vector& lambda,
                             const Vector& theta_guess, const NewtonConfig& config) {
  auto residual = [&](const Vector& th) { return residual_kpp(ops, th, eps, lambda); };
  auto jacobian = [&](const Vector& th) { return residual_kpp_jac(ops, th); };
  return newton_solve(residual, jacobian, theta_guess, config).x;
}

}  // namespace ecfm
