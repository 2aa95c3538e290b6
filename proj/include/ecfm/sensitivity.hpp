#pragma once

#include "ecfm/operators.hpp"
#include "ecfm/solvers.hpp"

#include <array>
#include <optional>

namespace ecfm {

/// Tangent trajectories d theta_t / d eps_p (and d lambda_t / d eps_p for the
/// constraint-force march), one (P+1) x N (resp. (P+1) x C) matrix per
/// parameter p. Row 0 is zero: the initial state does not depend on eps.
struct SensitivityTrajectory {
  std::array<Matrix, 2> dtheta;
  std::optional<std::array<Matrix, 2>> dlambda;
};

/// Forward sensitivities of the standard backward-Euler march. Each step
/// factors the residual Jacobian at the converged state once and solves
/// both parameter columns against it.
SensitivityTrajectory march_sensitivity_standard(const DiscreteOperatorSet& ops, const TimeGrid& grid,
                                                 const Vector& eps, const Trajectory& trajectory);

/// Forward sensitivities of the augmented march; the constraint rows enforce
/// M d theta / d eps = 0 at every step.
SensitivityTrajectory march_sensitivity_ecfm(const DiscreteOperatorSet& ops, const TimeGrid& grid,
                                             const Vector& eps, const Trajectory& trajectory);

/// z_INV = dt/2 sum_{t=1..P} ||M theta_t - v_t||^2
double objective_standard(const DiscreteOperatorSet& ops, const Trajectory& trajectory, const Matrix& data,
                          double dt);
/// z_ECFM = dt/2 sum_{t=1..P} ||lambda_t||^2
double objective_ecfm(const Trajectory& trajectory, double dt);

Vector grad_objective_standard(const DiscreteOperatorSet& ops, const Trajectory& trajectory,
                               const SensitivityTrajectory& sens, const Matrix& data, double dt);
Vector grad_objective_ecfm(const Trajectory& trajectory, const SensitivityTrajectory& sens, double dt);

}  // namespace ecfm
