#include "ecfm/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace ecfm {
namespace {

constexpr double kPi = std::numbers::pi;

int scaled(int order, const AssemblyOptions& options) {
  return std::max(1, static_cast<int>(std::ceil(order * options.quadrature_scale)));
}

void require_size(const Vector& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    throw SolverError(ErrorKind::DimensionMismatch,
                      std::string(what) + ": expected size " + std::to_string(n) + ", got " +
                          std::to_string(v.size()));
  }
}

// Values of every basis member (columns) at the nodes (rows) of `rule`.
Matrix tabulate(const BasisFamily& basis, const QuadratureRule& rule, int derivative) {
  Matrix table(rule.size(), basis.count());
  for (std::size_t q = 0; q < rule.size(); ++q) {
    for (int i = 1; i <= basis.count(); ++i) {
      table(q, i - 1) = eval_basis(basis, i, rule.points[q].x1, derivative);
    }
  }
  return table;
}

Vector weights_of(const QuadratureRule& rule) {
  return Eigen::Map<const Vector>(rule.weights.data(), static_cast<Eigen::Index>(rule.size()));
}

std::vector<double> hat_breakpoints(const std::vector<double>& centers, double h) {
  std::vector<double> cuts = {0.0, 1.0};
  for (double c : centers) {
    for (double x : {c - h, c, c + h}) {
      if (x > 0.0 && x < 1.0) cuts.push_back(x);
    }
  }
  return cuts;
}

// Gamma_ij = int f_i hat_j for a univariate basis.
Matrix hat_constraint_matrix(const BasisFamily& basis, const BasisFamily& hat,
                             const std::vector<double>& centers, int order) {
  const QuadratureRule rule = composite_gauss_legendre(order, hat_breakpoints(centers, hat.half_width()));
  const Matrix values = tabulate(basis, rule, 0);
  Matrix gamma(basis.count(), static_cast<Eigen::Index>(centers.size()));
  for (std::size_t j = 0; j < centers.size(); ++j) {
    Vector weighted(rule.size());
    for (std::size_t q = 0; q < rule.size(); ++q) {
      weighted(q) = rule.weights[q] * eval_constraint_shape(hat, centers[j], rule.points[q].x1);
    }
    gamma.col(j) = values.transpose() * weighted;
  }
  return gamma;
}

// 1D sine tables on a rule: S(q, a-1) = sin(a pi x_q), and derivatives.
Matrix sine_table(int count, const QuadratureRule& rule, bool derivative) {
  Matrix table(rule.size(), count);
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const double x = rule.points[q].x1;
    for (int a = 1; a <= count; ++a) {
      table(q, a - 1) = derivative ? a * kPi * std::cos(a * kPi * x) : std::sin(a * kPi * x);
    }
  }
  return table;
}

}  // namespace

void TimeGrid::validate() const {
  if (!(total_time > 0.0) || steps < 1) {
    throw SolverError(ErrorKind::InvalidArgument, "time grid needs T > 0 and P >= 1");
  }
}

Tensor3::Tensor3(int n0, int n1, int n2) : slices_(n0, Matrix::Zero(n1, n2)) {}

Vector Tensor3::contract(const Vector& a, const Vector& b) const {
  Vector r(dim0());
  for (int i = 0; i < dim0(); ++i) r(i) = a.dot(slices_[i] * b);
  return r;
}

Matrix Tensor3::jacobian(const Vector& theta) const {
  Matrix jac(dim0(), dim1());
  for (int i = 0; i < dim0(); ++i) {
    jac.row(i) = (slices_[i] * theta + slices_[i].transpose() * theta).transpose();
  }
  return jac;
}

Matrix Tensor3::weighted_hessian(const Vector& y) const {
  Matrix h = Matrix::Zero(dim1(), dim2());
  for (int i = 0; i < dim0(); ++i) {
    if (y(i) != 0.0) h += y(i) * slices_[i];
  }
  return h + h.transpose();
}

Matrix measurement_matrix(const BasisFamily& basis, const std::vector<double>& points) {
  Matrix m(static_cast<Eigen::Index>(points.size()), basis.count());
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (int j = 1; j <= basis.count(); ++j) m(i, j - 1) = eval_basis(basis, j, points[i]);
    if (m.row(i).cwiseAbs().maxCoeff() < 1e-12) {
      throw SolverError(ErrorKind::InvalidArgument,
                        "measurement point " + std::to_string(points[i]) + " sees no basis function");
    }
  }
  return m;
}

Matrix measurement_matrix(const BasisFamily& basis, const std::vector<Point2>& points) {
  Matrix m(static_cast<Eigen::Index>(points.size()), basis.count());
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (int j = 1; j <= basis.count(); ++j) m(i, j - 1) = eval_basis(basis, j, points[i]);
    if (m.row(i).cwiseAbs().maxCoeff() < 1e-12) {
      throw SolverError(ErrorKind::InvalidArgument, "measurement point sees no basis function");
    }
  }
  return m;
}

DiscreteOperatorSet assemble_burgers(const BasisFamily& basis, const BasisFamily& constraint_basis,
                                     const std::vector<double>& measure_points,
                                     const SpaceTimeFn& source_fn, const TimeGrid& grid,
                                     const AssemblyOptions& options) {
  if (basis.kind() != BasisKind::Sine1D && basis.kind() != BasisKind::ClampedBeamSine) {
    throw SolverError(ErrorKind::InvalidArgument, "Burgers assembly needs a univariate sine basis");
  }
  if (constraint_basis.kind() != BasisKind::Hat1D) {
    throw SolverError(ErrorKind::InvalidArgument, "Burgers constraint forces must be Hat1D");
  }
  if (measure_points.empty()) throw SolverError(ErrorKind::InvalidArgument, "need at least one measurement point");
  grid.validate();
  const int n = basis.count();
  const double top = basis.frequency(n);

  DiscreteOperatorSet ops;
  ops.measurement = measurement_matrix(basis, measure_points);

  const QuadratureRule rule = gauss_legendre(scaled(quadrature_order_for(3.0 * top), options));
  const Matrix f = tabulate(basis, rule, 0);
  const Matrix df = tabulate(basis, rule, 1);
  const Vector w = weights_of(rule);

  ops.mass = f.transpose() * w.asDiagonal() * f;
  ops.stiffness = df.transpose() * w.asDiagonal() * df;
  ops.advection = Tensor3(n, n, n);
  for (int i = 0; i < n; ++i) {
    const Vector wi = w.cwiseProduct(f.col(i));
    // A_ijk = int f_j f_k' f_i
    ops.advection.slice(i) = f.transpose() * wi.asDiagonal() * df;
  }

  ops.constraint = hat_constraint_matrix(basis, constraint_basis, measure_points,
                                         scaled(quadrature_order_for(top), options));

  ops.source.resize(n, grid.steps + 1);
  for (int step = 0; step <= grid.steps; ++step) {
    const double t = grid.node(step);
    Vector s(rule.size());
    for (std::size_t q = 0; q < rule.size(); ++q) s(q) = w(q) * source_fn(rule.points[q].x1, t);
    ops.source.col(step) = f.transpose() * s;
  }
  return ops;
}

DiscreteOperatorSet assemble_kpp(const BasisFamily& basis, const BasisFamily& source_basis,
                                 const BasisFamily& constraint_basis,
                                 const std::vector<Point2>& measure_points, double diffusion, double reaction,
                                 const AssemblyOptions& options) {
  if (basis.kind() != BasisKind::TensorSine2D || source_basis.kind() != BasisKind::TensorSine2D) {
    throw SolverError(ErrorKind::InvalidArgument, "Fisher-KPP solution and source bases must be TensorSine2D");
  }
  if (constraint_basis.kind() != BasisKind::GaussianRBF) {
    throw SolverError(ErrorKind::InvalidArgument, "Fisher-KPP constraint forces must be GaussianRBF");
  }
  if (measure_points.empty()) throw SolverError(ErrorKind::InvalidArgument, "need at least one measurement point");
  const int n = basis.count();
  const int axis = basis.per_axis();
  const int src_axis = source_basis.per_axis();
  const int top = std::max(axis, src_axis);

  DiscreteOperatorSet ops;
  ops.reaction = reaction;
  ops.measurement = measurement_matrix(basis, measure_points);

  // Separable 1D integrals over [0,1].
  const QuadratureRule rule = gauss_legendre(scaled(quadrature_order_for(3.0 * top), options));
  const Matrix s = sine_table(top, rule, false);
  const Matrix ds = sine_table(top, rule, true);
  const Vector w = weights_of(rule);
  const Matrix m1 = s.transpose() * w.asDiagonal() * s;    // int s_a s_b
  const Matrix d1 = ds.transpose() * w.asDiagonal() * ds;  // int s_a' s_b'
  std::vector<Matrix> t1(axis);                            // t1[a](b, c) = int s_a s_b s_c
  for (int a = 0; a < axis; ++a) {
    const Vector wa = w.cwiseProduct(s.col(a));
    t1[a] = s.leftCols(axis).transpose() * wa.asDiagonal() * s.leftCols(axis);
  }

  ops.mass.resize(n, n);
  ops.stiffness.resize(n, n);
  for (int i = 1; i <= n; ++i) {
    auto [ai, bi] = basis.tensor_mode(i);
    for (int j = 1; j <= n; ++j) {
      auto [aj, bj] = basis.tensor_mode(j);
      const double mx = m1(ai - 1, aj - 1);
      const double my = m1(bi - 1, bj - 1);
      ops.mass(i - 1, j - 1) = mx * my;
      ops.stiffness(i - 1, j - 1) = diffusion * (d1(ai - 1, aj - 1) * my + mx * d1(bi - 1, bj - 1));
    }
  }

  ops.advection = Tensor3(n, n, n);
  for (int i = 1; i <= n; ++i) {
    auto [ai, bi] = basis.tensor_mode(i);
    Matrix& slice = ops.advection.slice(i - 1);
    for (int j = 1; j <= n; ++j) {
      auto [aj, bj] = basis.tensor_mode(j);
      for (int k = 1; k <= n; ++k) {
        auto [ak, bk] = basis.tensor_mode(k);
        slice(j - 1, k - 1) = t1[ai - 1](aj - 1, ak - 1) * t1[bi - 1](bj - 1, bk - 1);
      }
    }
  }

  ops.source.resize(n, source_basis.count());
  for (int i = 1; i <= n; ++i) {
    auto [ai, bi] = basis.tensor_mode(i);
    for (int alpha = 1; alpha <= source_basis.count(); ++alpha) {
      auto [aa, ba] = source_basis.tensor_mode(alpha);
      ops.source(i - 1, alpha - 1) = m1(ai - 1, aa - 1) * m1(bi - 1, ba - 1);
    }
  }

  // exp(-w |x-c|^2) factorizes over the axes.
  const double width = constraint_basis.rbf_width();
  const int panels = static_cast<int>(std::ceil(2.0 * std::sqrt(width))) + 8;
  const QuadratureRule fine = panel_gauss_legendre(scaled(10, options), 0.0, 1.0, panels);
  const Matrix sf = sine_table(axis, fine, false);
  auto gauss_projection = [&](double center) {
    Vector g(fine.size());
    for (std::size_t q = 0; q < fine.size(); ++q) {
      const double d = fine.points[q].x1 - center;
      g(q) = fine.weights[q] * std::exp(-width * d * d);
    }
    return Vector(sf.transpose() * g);
  };
  ops.constraint.resize(n, static_cast<Eigen::Index>(measure_points.size()));
  for (std::size_t j = 0; j < measure_points.size(); ++j) {
    const Vector gx = gauss_projection(measure_points[j].x1);
    const Vector gy = gauss_projection(measure_points[j].x2);
    for (int i = 1; i <= n; ++i) {
      auto [ai, bi] = basis.tensor_mode(i);
      ops.constraint(i - 1, j) = width / kPi * gx(ai - 1) * gy(bi - 1);
    }
  }
  return ops;
}

Vector assemble_load_2d(const BasisFamily& basis, const SpaceFn2& source, const std::vector<double>& breakpoints,
                        const AssemblyOptions& options) {
  const int axis = basis.per_axis();
  const QuadratureRule rule = composite_gauss_legendre(scaled(quadrature_order_for(axis + 8.0), options), breakpoints);
  const Matrix s = sine_table(axis, rule, false);
  // G(p, q) = w_p w_q s(x_p, y_q)
  Matrix g(rule.size(), rule.size());
  for (std::size_t p = 0; p < rule.size(); ++p) {
    for (std::size_t q = 0; q < rule.size(); ++q) {
      g(p, q) = rule.weights[p] * rule.weights[q] * source({rule.points[p].x1, rule.points[q].x1});
    }
  }
  const Matrix proj = s.transpose() * g * s;  // (a, b) -> int sin(a pi x) sin(b pi y) s
  Vector load(basis.count());
  for (int i = 1; i <= basis.count(); ++i) {
    auto [a, b] = basis.tensor_mode(i);
    load(i - 1) = proj(a - 1, b - 1);
  }
  return load;
}

Vector assemble_load_1d(const BasisFamily& basis, const std::function<double(double)>& fn,
                        const std::vector<double>& breakpoints, const AssemblyOptions& options) {
  const double top = basis.frequency(basis.count());
  const QuadratureRule rule = composite_gauss_legendre(scaled(quadrature_order_for(top + 16.0), options), breakpoints);
  const Matrix f = tabulate(basis, rule, 0);
  Vector s(rule.size());
  for (std::size_t q = 0; q < rule.size(); ++q) s(q) = rule.weights[q] * fn(rule.points[q].x1);
  return f.transpose() * s;
}

BeamOperatorSet::BeamOperatorSet(const BasisFamily& basis, StiffnessFn stiffness, double end_stiffness,
                                 std::vector<double> breakpoints, const AssemblyOptions& options)
    : basis_(basis), stiffness_(std::move(stiffness)), end_stiffness_(end_stiffness) {
  const double top = basis.frequency(basis.count());
  const QuadratureRule rule = composite_gauss_legendre(scaled(quadrature_order_for(2.0 * top + 4.0), options),
                                                       breakpoints);
  for (std::size_t q = 0; q < rule.size(); ++q) {
    quad_x_.push_back(rule.points[q].x1);
    quad_w_.push_back(rule.weights[q]);
  }
  second_derivs_ = tabulate(basis, rule, 2);
}

Matrix BeamOperatorSet::bending(double omega) const {
  Vector wh(static_cast<Eigen::Index>(quad_x_.size()));
  for (std::size_t q = 0; q < quad_x_.size(); ++q) wh(q) = quad_w_[q] * stiffness_(quad_x_[q], omega);
  return second_derivs_.transpose() * wh.asDiagonal() * second_derivs_;
}

std::pair<Matrix, Matrix> BeamOperatorSet::affine_bending() const {
  const Matrix k0 = bending(0.0);
  const Matrix k1 = bending(1.0) - k0;
  for (double omega : {0.25, 0.5, 0.75}) {
    const double gap = (bending(omega) - (k0 + omega * k1)).norm();
    if (gap > 1e-10 * (1.0 + k0.norm())) {
      throw SolverError(ErrorKind::InvalidArgument, "bending stiffness is not affine in omega");
    }
  }
  return {k0, k1};
}

Matrix BeamOperatorSet::effective_stiffness(double omega, double beta) const {
  return bending(omega) - beta * geometric - boundary;
}

BeamOperatorSet assemble_beam(const BasisFamily& basis, const StiffnessFn& stiffness_fn, double end_stiffness,
                              const std::function<double(double)>& load_fn, const BasisFamily& constraint_basis,
                              const std::vector<double>& measure_points, const std::vector<double>& breakpoints,
                              const AssemblyOptions& options) {
  if (basis.kind() != BasisKind::ClampedBeamSine && basis.kind() != BasisKind::Sine1D) {
    throw SolverError(ErrorKind::InvalidArgument, "beam assembly needs a univariate sine basis");
  }
  for (double omega : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    if (std::abs(stiffness_fn(1.0, omega) - end_stiffness) > 1e-12 * (1.0 + std::abs(end_stiffness))) {
      throw SolverError(ErrorKind::InvalidArgument, "stiffness at x = 1 must equal H0 for every omega");
    }
  }
  BeamOperatorSet ops(basis, stiffness_fn, end_stiffness, breakpoints, options);
  const int n = basis.count();
  const double top = basis.frequency(n);

  const QuadratureRule rule = gauss_legendre(scaled(quadrature_order_for(2.0 * top), options));
  const Matrix df = tabulate(basis, rule, 1);
  ops.geometric = df.transpose() * weights_of(rule).asDiagonal() * df;

  // Row i is the test function: H0 w''(1) dw'(1).
  ops.boundary.resize(n, n);
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      ops.boundary(i - 1, j - 1) = end_stiffness * eval_basis(basis, i, 1.0, 1) * eval_basis(basis, j, 1.0, 2);
    }
  }

  ops.load = assemble_load_1d(basis, load_fn, breakpoints, options);
  if (!measure_points.empty()) {
    if (constraint_basis.kind() != BasisKind::Hat1D) {
      throw SolverError(ErrorKind::InvalidArgument, "beam constraint forces must be Hat1D");
    }
    ops.measurement = measurement_matrix(basis, measure_points);
    ops.constraint = hat_constraint_matrix(basis, constraint_basis, measure_points,
                                           scaled(quadrature_order_for(top + 8.0), options));
  } else {
    ops.measurement.resize(0, n);
    ops.constraint.resize(n, 0);
  }
  return ops;
}

StiffnessFn beam_defect_stiffness(double end_stiffness) {
  return [end_stiffness](double x, double omega) {
    return end_stiffness * (2.0 * omega * std::abs(x - 0.5) + 1.0 - omega);
  };
}

Vector residual_burgers(const DiscreteOperatorSet& ops, const Vector& theta_next, const Vector& theta_prev,
                        double dt, const Vector& eps, int step, const std::optional<Vector>& lambda) {
  const int n = ops.size();
  require_size(theta_next, n, "theta_next");
  require_size(theta_prev, n, "theta_prev");
  require_size(eps, 2, "eps");
  if (!(dt > 0.0)) throw SolverError(ErrorKind::InvalidArgument, "dt must be positive");
  if (step < 0 || step >= ops.source.cols()) throw SolverError(ErrorKind::InvalidArgument, "step outside time grid");
  const double nu = std::pow(10.0, -eps(0));
  Vector r = ops.mass * (theta_next - theta_prev) / dt + nu * (ops.stiffness * theta_next) +
             ops.advection.contract(theta_next, theta_next) - eps(1) * ops.source.col(step);
  if (lambda) {
    require_size(*lambda, ops.constraint.cols(), "lambda");
    r -= ops.constraint * *lambda;
  }
  return r;
}

Matrix residual_burgers_jac(const DiscreteOperatorSet& ops, const Vector& theta_next, double dt,
                            const Vector& eps) {
  require_size(theta_next, ops.size(), "theta_next");
  require_size(eps, 2, "eps");
  return ops.mass / dt + std::pow(10.0, -eps(0)) * ops.stiffness + ops.advection.jacobian(theta_next);
}

Vector residual_kpp(const DiscreteOperatorSet& ops, const Vector& theta, const Vector& eps,
                    const std::optional<Vector>& lambda) {
  require_size(theta, ops.size(), "theta");
  require_size(eps, ops.source.cols(), "eps");
  Vector r = ops.stiffness * theta - ops.reaction * (ops.mass * theta) +
             ops.reaction * ops.advection.contract(theta, theta) - ops.source * eps;
  if (lambda) {
    require_size(*lambda, ops.constraint.cols(), "lambda");
    r -= ops.constraint * *lambda;
  }
  return r;
}

Matrix residual_kpp_jac(const DiscreteOperatorSet& ops, const Vector& theta) {
  require_size(theta, ops.size(), "theta");
  return ops.stiffness - ops.reaction * ops.mass + ops.reaction * ops.advection.jacobian(theta);
}

Matrix residual_kpp_deps(const DiscreteOperatorSet& ops) { return -ops.source; }

Matrix residual_kpp_dlambda(const DiscreteOperatorSet& ops) { return -ops.constraint; }

}  // namespace ecfm
