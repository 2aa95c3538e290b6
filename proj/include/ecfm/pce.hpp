#pragma once

#include "ecfm/basis.hpp"
#include "ecfm/linalg.hpp"
#include "ecfm/operators.hpp"

#include <vector>

namespace ecfm {

/// Spatial x stochastic expansion coefficients; theta(j, k) multiplies
/// f_{j+1}(x) Psi_{k+1}(omega).
struct PCECoefficients {
  Matrix theta;

  /// Spatial coefficient vector at one realization.
  Vector at(const BasisFamily& stochastic_basis, double omega) const;
};

/// Expectations of products of stochastic basis members under omega ~ U(0,1).
struct StochasticGramian {
  Vector g0;  // int Psi_k
  Matrix g1;  // int omega Psi_k Psi_q
  Matrix g2;  // int Psi_k Psi_q

  int size() const { return static_cast<int>(g0.size()); }
};

/// Closed form for shifted Legendre members via the three-term recurrence.
StochasticGramian stochastic_gramian(const BasisFamily& stochastic_basis);

/// Psi_1(omega) .. Psi_M(omega).
Vector stochastic_values(const BasisFamily& stochastic_basis, double omega);

struct MeasurementReplicates {
  std::vector<double> points;
  Matrix values;  // C x D

  int locations() const { return static_cast<int>(values.rows()); }
  int replicates() const { return static_cast<int>(values.cols()); }
  void validate() const;
};

/// Flattened block system A vec(Theta) = b with vec column-major (spatial
/// index fastest). Block (l, k) is int (K^B(w) - eps K^G - K^BC) Psi_k Psi_l.
struct StochasticSystem {
  Matrix matrix;
  Vector rhs;
  int spatial = 0;
  int stochastic = 0;
};

StochasticSystem assemble_stochastic_galerkin(const BeamOperatorSet& ops, const StochasticGramian& gram, double eps,
                                              const Vector& lambda);

/// Factorized stochastic Galerkin solve; the factorization is kept for the
/// sensitivity solves.
struct StochasticSolution {
  PCECoefficients coefficients;
  LuFactor factor;
  int spatial = 0;
  int stochastic = 0;
};

/// Throws SingularJacobian when the block operator is not positive definite
/// (the load reaches buckling for part of the omega range).
StochasticSolution solve_stochastic_galerkin(const BeamOperatorSet& ops, const StochasticGramian& gram, double eps,
                                             const Vector& lambda);

struct StochasticSensitivity {
  std::vector<Matrix> dtheta_dlambda;  // one N x M matrix per constraint column
  Matrix dtheta_deps;                  // N x M
};

StochasticSensitivity stochastic_sensitivity(const StochasticSolution& solution, const BeamOperatorSet& ops,
                                             const StochasticGramian& gram);

struct PredictionMoments {
  Vector mean;
  Vector variance;
};

/// Mean and variance of M Theta Psi(omega). Throws InvalidArgument when the
/// raw variance is negative beyond round-off.
PredictionMoments moments(const Matrix& theta, const Matrix& measurement, const StochasticGramian& gram);

constexpr double kVarianceFloor = 1e-12;

struct LikelihoodValue {
  double value = 0.0;
  bool floored = false;  // some variance was raised to kVarianceFloor
};

/// Negative log Gaussian pseudo-likelihood of the replicates.
LikelihoodValue pseudo_log_likelihood(const Vector& mean, const Vector& variance, const MeasurementReplicates& data);

struct LikelihoodGradient {
  double value = 0.0;
  Vector d_lambda;
  double d_eps = 0.0;
  bool floored = false;
};

/// Chains dLambda/dmu and dLambda/dsigma^2 through the moment sensitivities.
/// Floored variances are treated as constants.
LikelihoodGradient grad_pseudo_likelihood(const Matrix& theta, const StochasticGramian& gram,
                                          const Matrix& measurement, const MeasurementReplicates& data,
                                          const StochasticSensitivity& sensitivity);

/// Deterministic solve (K^B(omega) - beta K^G - K^BC) theta = F + Gamma lambda.
/// Throws SingularJacobian at or beyond buckling.
Vector solve_beam_deterministic(const BeamOperatorSet& ops, double omega, double beta, const Vector& lambda);

/// Smallest beta > 0 at which the effective stiffness loses definiteness.
double critical_load(const BeamOperatorSet& ops, double omega);

}  // namespace ecfm
