#pragma once

#include "ecfm/linalg.hpp"

#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace ecfm {

struct ValueAndGradient {
  double value = 0.0;
  Vector gradient;
};

using ValueFn = std::function<double(const Vector&)>;
using GradientFn = std::function<Vector(const Vector&)>;
using ValueGradientFn = std::function<ValueAndGradient(const Vector&)>;

enum class OptStatus {
  Converged,          // KKT certificate met (or all ADAM epochs completed)
  MaxItersExceeded,
  NonFiniteGradient,
  Infeasible,
  LinearAlgebraFailure,
  Stalled,            // line search could not make progress
  SolverFailure,      // objective callback kept throwing
};

const char* to_string(OptStatus status);

struct OptResult {
  Vector x;
  std::vector<double> objective_trace;
  std::vector<double> constraint_violation_trace;
  bool converged = false;
  int iterations = 0;
  OptStatus status = OptStatus::MaxItersExceeded;
  std::string message;

  // KKT data at x (solve_nlp only).
  Vector eq_multipliers;
  Vector ineq_multipliers;
  double stationarity = 0.0;
  double feasibility = 0.0;
  double complementarity = 0.0;
};

struct AdamConfig {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int epochs = 250;
  int max_consecutive_failures = 3;

  void validate() const;
};

/// Bias-corrected ADAM run for exactly `config.epochs` updates.
/// objective_trace[k] is the value at the k-th iterate. A callback throwing
/// SolverError is retried from the midpoint towards the last good iterate;
/// `max_consecutive_failures` such failures abort with SolverFailure.
OptResult adam_minimize(const ValueGradientFn& fn, const Vector& x0, const AdamConfig& config);
OptResult adam_minimize(const GradientFn& grad_fn, const ValueFn& value_fn, const Vector& x0,
                        const AdamConfig& config);

/// min f(x) s.t. c_e(x) = 0, c_i(x) >= 0.
struct NLPProblem {
  ValueFn objective;
  GradientFn objective_gradient;

  int num_eq = 0;
  std::function<Vector(const Vector&)> eq_constraints;
  std::function<Matrix(const Vector&)> eq_jacobian;

  int num_ineq = 0;
  std::function<Vector(const Vector&)> ineq_constraints;
  std::function<Matrix(const Vector&)> ineq_jacobian;

  /// Optional exact Hessian of L(x, y, mu) = f - y.c_e - mu.c_i. Without it a
  /// damped BFGS approximation is used.
  std::function<Matrix(const Vector& x, const Vector& y, const Vector& mu)> lagrangian_hessian;

  Vector x0;

  void validate() const;
};

struct NLPOptions {
  double stationarity_tol = 1e-6;  // scaled by (1 + |f|)
  double feasibility_tol = 1e-8;
  int max_iters = 200;
};

/// Line-search SQP with an l1 merit function. Each quadratic subproblem is
/// solved by eliminating the equality constraints through the KKT matrix
/// and solving the small bound-constrained dual over the inequality
/// multipliers (elastic when the linearization is inconsistent).
OptResult solve_nlp(const NLPProblem& problem, const NLPOptions& options = {});

/// Solves min 1/2 m^T Q m + q^T m subject to lower <= m <= upper for small
/// symmetric positive semidefinite Q (primal active set).
Vector solve_box_qp(const Matrix& q_matrix, const Vector& q_vector, double lower, double upper);

struct PenaltyOptions {
  bool log_objective = false;  // replace f by log(f + log_guard)
  double log_guard = 1e-12;
};

/// Minimizes f(x) + weight * sum_j p_j(x) (or log(f + guard) + weight * sum p_j).
OptResult penalty_minimize(const ValueGradientFn& objective, const std::vector<ValueGradientFn>& penalty_terms,
                           double weight, const std::variant<NLPOptions, AdamConfig>& inner, const Vector& x0,
                           const PenaltyOptions& options = {});

}  // namespace ecfm
