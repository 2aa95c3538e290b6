#include "ecfm/sensitivity.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace ecfm {
namespace {

void check_trajectory(const DiscreteOperatorSet& ops, const TimeGrid& grid, const Trajectory& traj) {
  if (traj.theta.rows() != grid.steps + 1 || traj.theta.cols() != ops.size()) {
    throw SolverError(ErrorKind::DimensionMismatch, "trajectory does not match the grid/operators");
  }
}

// Right-hand sides of the tangent systems at step t -> t+1 (before the
// constraint block): column p = M/dt dtheta_t^p - dR/deps_p.
Matrix tangent_rhs(const DiscreteOperatorSet& ops, double dt, const Vector& eps, const Vector& theta_next,
                   const Vector& dtheta1_prev, const Vector& dtheta2_prev, int step) {
  const double nu = std::pow(10.0, -eps(0));
  Matrix rhs(ops.size(), 2);
  rhs.col(0) = ops.mass * dtheta1_prev / dt + std::numbers::ln10 * nu * (ops.stiffness * theta_next);
  rhs.col(1) = ops.mass * dtheta2_prev / dt + ops.source.col(step);
  return rhs;
}

}  // namespace

SensitivityTrajectory march_sensitivity_standard(const DiscreteOperatorSet& ops, const TimeGrid& grid,
                                                 const Vector& eps, const Trajectory& trajectory) {
  check_trajectory(ops, grid, trajectory);
  const int n = ops.size();
  const double dt = grid.dt();
  SensitivityTrajectory sens;
  sens.dtheta = {Matrix::Zero(grid.steps + 1, n), Matrix::Zero(grid.steps + 1, n)};
  for (int step = 1; step <= grid.steps; ++step) {
    const Vector theta = trajectory.theta.row(step).transpose();
    const LuFactor lu(residual_burgers_jac(ops, theta, dt, eps));
    if (lu.singular()) {
      throw SolverError(ErrorKind::SingularJacobian, "singular tangent operator at step " + std::to_string(step));
    }
    const Matrix rhs = tangent_rhs(ops, dt, eps, theta, sens.dtheta[0].row(step - 1).transpose(),
                                   sens.dtheta[1].row(step - 1).transpose(), step);
    const Matrix sol = lu.solve(rhs);
    sens.dtheta[0].row(step) = sol.col(0).transpose();
    sens.dtheta[1].row(step) = sol.col(1).transpose();
  }
  return sens;
}

SensitivityTrajectory march_sensitivity_ecfm(const DiscreteOperatorSet& ops, const TimeGrid& grid,
                                             const Vector& eps, const Trajectory& trajectory) {
  check_trajectory(ops, grid, trajectory);
  const int n = ops.size();
  const int c = ops.constraints();
  const double dt = grid.dt();
  SensitivityTrajectory sens;
  sens.dtheta = {Matrix::Zero(grid.steps + 1, n), Matrix::Zero(grid.steps + 1, n)};
  sens.dlambda = std::array<Matrix, 2>{Matrix::Zero(grid.steps + 1, c), Matrix::Zero(grid.steps + 1, c)};
  for (int step = 1; step <= grid.steps; ++step) {
    const Vector theta = trajectory.theta.row(step).transpose();
    const LuFactor lu(augmented_jacobian(residual_burgers_jac(ops, theta, dt, eps), ops.constraint,
                                         ops.measurement));
    if (lu.singular()) {
      throw SolverError(ErrorKind::SingularJacobian,
                        "singular augmented tangent operator at step " + std::to_string(step));
    }
    Matrix rhs = Matrix::Zero(n + c, 2);
    rhs.topRows(n) = tangent_rhs(ops, dt, eps, theta, sens.dtheta[0].row(step - 1).transpose(),
                                 sens.dtheta[1].row(step - 1).transpose(), step);
    const Matrix sol = lu.solve(rhs);
    for (int p = 0; p < 2; ++p) {
      sens.dtheta[p].row(step) = sol.col(p).head(n).transpose();
      (*sens.dlambda)[p].row(step) = sol.col(p).tail(c).transpose();
    }
  }
  return sens;
}

double objective_standard(const DiscreteOperatorSet& ops, const Trajectory& trajectory, const Matrix& data,
                          double dt) {
  double sum = 0.0;
  for (int t = 1; t <= trajectory.steps(); ++t) {
    sum += (ops.measurement * trajectory.theta.row(t).transpose() - data.col(t)).squaredNorm();
  }
  return 0.5 * dt * sum;
}

double objective_ecfm(const Trajectory& trajectory, double dt) {
  if (!trajectory.lambda) throw SolverError(ErrorKind::InvalidArgument, "trajectory carries no constraint forces");
  return 0.5 * dt * trajectory.lambda->bottomRows(trajectory.steps()).squaredNorm();
}

Vector grad_objective_standard(const DiscreteOperatorSet& ops, const Trajectory& trajectory,
                               const SensitivityTrajectory& sens, const Matrix& data, double dt) {
  Vector grad = Vector::Zero(2);
  for (int t = 1; t <= trajectory.steps(); ++t) {
    const Vector misfit = ops.measurement * trajectory.theta.row(t).transpose() - data.col(t);
    for (int p = 0; p < 2; ++p) {
      grad(p) += misfit.dot(ops.measurement * sens.dtheta[p].row(t).transpose());
    }
  }
  return dt * grad;
}

Vector grad_objective_ecfm(const Trajectory& trajectory, const SensitivityTrajectory& sens, double dt) {
  if (!trajectory.lambda || !sens.dlambda) {
    throw SolverError(ErrorKind::InvalidArgument, "constraint-force gradient needs lambda sensitivities");
  }
  Vector grad = Vector::Zero(2);
  for (int t = 1; t <= trajectory.steps(); ++t) {
    for (int p = 0; p < 2; ++p) grad(p) += trajectory.lambda->row(t).dot((*sens.dlambda)[p].row(t));
  }
  return dt * grad;
}

}  // namespace ecfm
