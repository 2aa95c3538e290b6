#pragma once

#include "ecfm/basis.hpp"
#include "ecfm/linalg.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace ecfm {

/// Uniform backward-Euler grid: steps of T / P, nodes t_n = n * dt, n = 0..P.
struct TimeGrid {
  double total_time = 1.0;
  int steps = 1;

  double dt() const { return total_time / steps; }
  double node(int n) const { return n * dt(); }
  void validate() const;
};

/// Dense order-3 tensor stored as slices: slice(i)(j, k) = T_ijk.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int n0, int n1, int n2);

  int dim0() const { return static_cast<int>(slices_.size()); }
  int dim1() const { return slices_.empty() ? 0 : static_cast<int>(slices_[0].rows()); }
  int dim2() const { return slices_.empty() ? 0 : static_cast<int>(slices_[0].cols()); }

  double& operator()(int i, int j, int k) { return slices_[i](j, k); }
  double operator()(int i, int j, int k) const { return slices_[i](j, k); }
  Matrix& slice(int i) { return slices_[i]; }
  const Matrix& slice(int i) const { return slices_[i]; }

  /// r_i = T_ijk a_j b_k
  Vector contract(const Vector& a, const Vector& b) const;
  /// d/dtheta of contract(theta, theta): row i is (T_i theta + T_i^T theta)^T.
  Matrix jacobian(const Vector& theta) const;
  /// sum_i y_i (T_i + T_i^T), the Hessian of y . contract(theta, theta).
  Matrix weighted_hessian(const Vector& y) const;

 private:
  std::vector<Matrix> slices_;
};

/// Assembled Galerkin operators for one problem instance.
///
/// `source` holds F column-wise: for the dynamic problem column n is F(t_n)
/// at the grid nodes; for the static problem column alpha is the projection
/// of source-basis member alpha.
struct DiscreteOperatorSet {
  Matrix mass;
  Matrix stiffness;
  Tensor3 advection;
  Matrix constraint;   // N x C
  Matrix source;       // N x (P+1) or N x M
  Matrix measurement;  // C x N
  double reaction = 1.0;

  int size() const { return static_cast<int>(mass.rows()); }
  int constraints() const { return static_cast<int>(measurement.rows()); }
};

struct AssemblyOptions {
  double quadrature_scale = 1.0;  // multiplies every quadrature order
};

using SpaceTimeFn = std::function<double(double x, double t)>;
using SpaceFn2 = std::function<double(Point2)>;

DiscreteOperatorSet assemble_burgers(const BasisFamily& basis, const BasisFamily& constraint_basis,
                                     const std::vector<double>& measure_points,
                                     const SpaceTimeFn& source_fn, const TimeGrid& grid,
                                     const AssemblyOptions& options = {});

/// Steady Fisher-KPP operators: stiffness carries the diffusion coefficient,
/// advection holds A_ijk = int f_i f_j f_k, source F_ia = int f_i f_a.
DiscreteOperatorSet assemble_kpp(const BasisFamily& basis, const BasisFamily& source_basis,
                                 const BasisFamily& constraint_basis,
                                 const std::vector<Point2>& measure_points, double diffusion = 0.5,
                                 double reaction = 1.0, const AssemblyOptions& options = {});

/// b_i = int s f_i over the unit square with a composite tensor rule whose
/// panels break at `breakpoints` (both axes).
Vector assemble_load_2d(const BasisFamily& basis, const SpaceFn2& source,
                        const std::vector<double>& breakpoints, const AssemblyOptions& options = {});

/// b_i = int u f_i over [0,1].
Vector assemble_load_1d(const BasisFamily& basis, const std::function<double(double)>& fn,
                        const std::vector<double>& breakpoints = {0.0, 1.0},
                        const AssemblyOptions& options = {});

/// Measurement operator M_ij = f_j(x_i); throws when a row vanishes.
Matrix measurement_matrix(const BasisFamily& basis, const std::vector<double>& points);
Matrix measurement_matrix(const BasisFamily& basis, const std::vector<Point2>& points);

using StiffnessFn = std::function<double(double x, double omega)>;

/// Euler-Bernoulli beam operators with random bending stiffness H(x, omega).
class BeamOperatorSet {
 public:
  BeamOperatorSet(const BasisFamily& basis, StiffnessFn stiffness, double end_stiffness,
                  std::vector<double> breakpoints, const AssemblyOptions& options);

  /// K^B(omega)_ij = int H(x, omega) f_i'' f_j''
  Matrix bending(double omega) const;
  /// Affine split K^B(omega) = bending0 + omega * bending1; throws when
  /// H is not affine in omega.
  std::pair<Matrix, Matrix> affine_bending() const;

  const BasisFamily& basis() const { return basis_; }
  double end_stiffness() const { return end_stiffness_; }
  int size() const { return basis_.count(); }
  int constraints() const { return static_cast<int>(measurement.rows()); }

  Matrix geometric;    // int f_i' f_j'
  Matrix boundary;     // H0 f_i'(1) f_j''(1)
  Vector load;         // int p f_i
  Matrix constraint;   // N x C
  Matrix measurement;  // C x N

  /// K^B(omega) - beta K^G - K^BC
  Matrix effective_stiffness(double omega, double beta) const;

 private:
  BasisFamily basis_;
  StiffnessFn stiffness_;
  double end_stiffness_;
  std::vector<double> quad_x_;
  std::vector<double> quad_w_;
  Matrix second_derivs_;  // quadrature node x basis index
};

BeamOperatorSet assemble_beam(const BasisFamily& basis, const StiffnessFn& stiffness_fn, double end_stiffness,
                              const std::function<double(double)>& load_fn,
                              const BasisFamily& constraint_basis, const std::vector<double>& measure_points,
                              const std::vector<double>& breakpoints = {0.0, 1.0},
                              const AssemblyOptions& options = {});

/// Corrected random stiffness H0 (2 omega |x - 1/2| + 1 - omega).
StiffnessFn beam_defect_stiffness(double end_stiffness);

// Backward-Euler Burgers residual at step `step` (F evaluated at t_step):
// (M/dt + 10^-e1 K) th + A:(th x th) - (M/dt) th_prev - e2 F - Gamma lambda.
Vector residual_burgers(const DiscreteOperatorSet& ops, const Vector& theta_next, const Vector& theta_prev,
                        double dt, const Vector& eps, int step, const std::optional<Vector>& lambda = {});
Matrix residual_burgers_jac(const DiscreteOperatorSet& ops, const Vector& theta_next, double dt,
                            const Vector& eps);

// Static Fisher-KPP residual (K - rM) th + r A:(th x th) - F eps - Gamma lambda.
Vector residual_kpp(const DiscreteOperatorSet& ops, const Vector& theta, const Vector& eps,
                    const std::optional<Vector>& lambda = {});
Matrix residual_kpp_jac(const DiscreteOperatorSet& ops, const Vector& theta);
Matrix residual_kpp_deps(const DiscreteOperatorSet& ops);
Matrix residual_kpp_dlambda(const DiscreteOperatorSet& ops);

}  // namespace ecfm
