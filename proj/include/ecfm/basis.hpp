#pragma once

#include <array>
#include <functional>
#include <utility>
#include <vector>

namespace ecfm {

/// A coordinate in the unit square.
struct Point2 {
  double x1 = 0.0;
  double x2 = 0.0;
};

enum class BasisKind { Sine1D, TensorSine2D, ClampedBeamSine, ShiftedLegendre, Hat1D, GaussianRBF };

/// Global basis families and constraint-force shapes on [0,1] or [0,1]^2.
///
/// Members are indexed from 1. TensorSine2D with count n*n orders its members
/// as sin(a pi x1) sin(b pi x2) with a the slow index: member k maps to
/// a = (k-1)/n + 1, b = (k-1)%n + 1. ShiftedLegendre member k is the
/// unnormalized shifted Legendre polynomial of degree k-1.
class BasisFamily {
 public:
  static BasisFamily sine_1d(int count);
  static BasisFamily tensor_sine_2d(int count);
  static BasisFamily clamped_beam_sine(int count);
  static BasisFamily shifted_legendre(int count);
  static BasisFamily hat_1d(double half_width);
  static BasisFamily gaussian_rbf(double width);

  BasisKind kind() const { return kind_; }
  int count() const { return count_; }
  double half_width() const { return param_; }
  double rbf_width() const { return param_; }
  int dimension() const;
  bool is_constraint_shape() const {
    return kind_ == BasisKind::Hat1D || kind_ == BasisKind::GaussianRBF;
  }

  /// Members per axis of a TensorSine2D family.
  int per_axis() const { return per_axis_; }
  /// Axis frequencies (a, b) of TensorSine2D member `index`.
  std::pair<int, int> tensor_mode(int index) const;
  /// Frequency multiplier of member `index` in units of pi (sine families).
  double frequency(int index) const;

 private:
  BasisFamily(BasisKind kind, int count, double param) : kind_(kind), count_(count), param_(param) {}

  BasisKind kind_;
  int count_;
  double param_;
  int per_axis_ = 0;
};

// Univariate members; `derivative` in {0,1,2,3}.
double eval_basis(const BasisFamily& family, int index, double x, int derivative = 0);
inline double eval_basis_dx(const BasisFamily& family, int index, double x) {
  return eval_basis(family, index, x, 1);
}
inline double eval_basis_dxx(const BasisFamily& family, int index, double x) {
  return eval_basis(family, index, x, 2);
}

// Tensor-sine members on the unit square.
double eval_basis(const BasisFamily& family, int index, Point2 x);
std::array<double, 2> eval_basis_grad(const BasisFamily& family, int index, Point2 x);

/// Hat1D: max(0, 1 - |x - c| / h).
double eval_constraint_shape(const BasisFamily& family, double center, double x);
/// GaussianRBF: (w / pi) exp(-w |x - c|^2), unit mass over the plane.
double eval_constraint_shape(const BasisFamily& family, Point2 center, Point2 x);

struct QuadratureRule {
  int dimension = 1;
  std::vector<Point2> points;  // x2 unused when dimension == 1
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

/// Gauss-Legendre rule on [0,1] (dimension 1) or [0,1]^2 (tensor product).
/// Exact for polynomials of degree <= 2*order - 1 per axis.
QuadratureRule gauss_legendre(int order, int dimension = 1);

/// 1D Gauss-Legendre rule with `order` nodes on each sub-interval between
/// consecutive sorted breakpoints.
QuadratureRule composite_gauss_legendre(int order, const std::vector<double>& breakpoints);

/// 1D rule on [a, b] split into `panels` equal panels.
QuadratureRule panel_gauss_legendre(int order, double a, double b, int panels);

double integrate(const QuadratureRule& rule, const std::function<double(double)>& f);
double integrate(const QuadratureRule& rule, const std::function<double(Point2)>& f);

/// Gauss points for a trigonometric integrand whose total frequency is
/// `max_frequency` (in units of pi): enough for round-off accuracy on
/// [0, 1], never fewer than frequency + 2, floored at `minimum`.
int quadrature_order_for(double max_frequency, int minimum = 4);

}  // namespace ecfm
