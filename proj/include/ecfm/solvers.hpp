#pragma once

#include "ecfm/linalg.hpp"
#include "ecfm/operators.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace ecfm {

struct NewtonConfig {
  double tol = 1e-6;  // absolute threshold on ||R||_2
  int max_iters = 50;
  int divergence_window = 5;  // consecutive residual increases before giving up

  void validate() const;
};

struct NewtonResult {
  Vector x;
  int iterations = 0;
  double residual_norm = 0.0;
};

using ResidualFn = std::function<Vector(const Vector&)>;
using JacobianFn = std::function<Matrix(const Vector&)>;

/// Full-step Newton iteration until ||R(x)|| < tol.
/// Throws SolverError with SingularJacobian, MaxItersExceeded or Diverged.
NewtonResult newton_solve(const ResidualFn& residual, const JacobianFn& jacobian, const Vector& initial_guess,
                          const NewtonConfig& config = {});

/// Time-indexed solution coefficients; row n of `theta` is theta at t_n.
/// `lambda` is present for constraint-force marches, with row 0 zero.
struct Trajectory {
  Matrix theta;
  std::optional<Matrix> lambda;
  std::vector<int> newton_iterations;

  int steps() const { return static_cast<int>(theta.rows()) - 1; }
};

/// Exact L2 projection: solves M theta0 = b with b_i = int u0 f_i.
Vector project_initial_condition(const Matrix& mass, const Vector& load);

Trajectory march_burgers_standard(const DiscreteOperatorSet& ops, const TimeGrid& grid, const Vector& eps,
                                  const Vector& theta0, const NewtonConfig& config = {});

/// Backward-Euler march of the augmented system [R - Gamma lambda; M theta - v].
/// `data` is C x (P+1), column n holding the measurements at t_n.
Trajectory march_burgers_ecfm(const DiscreteOperatorSet& ops, const TimeGrid& grid, const Vector& eps,
                              const Vector& theta0, const Matrix& data, const NewtonConfig& config = {});

/// Newton on the static residual with fixed source parameters and forces.
Vector solve_kpp_equilibrium(const DiscreteOperatorSet& ops, const Vector& eps, const Vector& lambda,
                             const Vector& theta_guess, const NewtonConfig& config = {});

/// Augmented Jacobian [[J, -Gamma], [M, 0]].
Matrix augmented_jacobian(const Matrix& jac, const Matrix& constraint, const Matrix& measurement);

}  // namespace ecfm
