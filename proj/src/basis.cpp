#include "ecfm/basis.hpp"

#include "ecfm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace ecfm {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDomainSlack = 1e-12;

void check_index(const BasisFamily& family, int index) {
  if (index < 1 || index > family.count()) {
    throw SolverError(ErrorKind::InvalidArgument,
                      "basis index " + std::to_string(index) + " outside 1.." +
                          std::to_string(family.count()));
  }
}

void check_unit(double x) {
  if (!(x >= -kDomainSlack && x <= 1.0 + kDomainSlack)) {
    throw SolverError(ErrorKind::InvalidArgument,
                      "coordinate " + std::to_string(x) + " outside [0,1]");
  }
}

// d^n/dx^n sin(k x)
double sine_derivative(double k, double x, int derivative) {
  const double phase = k * x;
  switch (derivative) {
    case 0: return std::sin(phase);
    case 1: return k * std::cos(phase);
    case 2: return -k * k * std::sin(phase);
    case 3: return -k * k * k * std::cos(phase);
    default:
      throw SolverError(ErrorKind::InvalidArgument, "derivative order must be 0..3");
  }
}

// Derivative of order `derivative` of the Legendre polynomial P_degree at s,
// using D^d P_{n+1} = D^d P_{n-1} + (2n+1) D^{d-1} P_n for d >= 1.
double legendre_derivative(int degree, double s, int derivative) {
  // table[d][n] for n = 0..degree
  std::vector<std::vector<double>> table(derivative + 1, std::vector<double>(degree + 1, 0.0));
  table[0][0] = 1.0;
  if (degree >= 1) table[0][1] = s;
  for (int n = 1; n < degree; ++n) {
    table[0][n + 1] = ((2.0 * n + 1.0) * s * table[0][n] - n * table[0][n - 1]) / (n + 1.0);
  }
  for (int d = 1; d <= derivative; ++d) {
    // D^d P_0 = 0; D^d P_1 = (d == 1)
    if (degree >= 1) table[d][1] = (d == 1) ? 1.0 : 0.0;
    for (int n = 1; n < degree; ++n) {
      table[d][n + 1] = table[d][n - 1] + (2.0 * n + 1.0) * table[d - 1][n];
    }
  }
  return table[derivative][degree];
}

}  // namespace

BasisFamily BasisFamily::sine_1d(int count) {
  if (count < 1) throw SolverError(ErrorKind::InvalidArgument, "basis count must be positive");
  return BasisFamily(BasisKind::Sine1D, count, 0.0);
}

BasisFamily BasisFamily::tensor_sine_2d(int count) {
  const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(count))));
  if (count < 1 || n * n != count) {
    throw SolverError(ErrorKind::InvalidArgument, "TensorSine2D count must be a perfect square");
  }
  BasisFamily family(BasisKind::TensorSine2D, count, 0.0);
  family.per_axis_ = n;
  return family;
}

BasisFamily BasisFamily::clamped_beam_sine(int count) {
  if (count < 1) throw SolverError(ErrorKind::InvalidArgument, "basis count must be positive");
  return BasisFamily(BasisKind::ClampedBeamSine, count, 0.0);
}

BasisFamily BasisFamily::shifted_legendre(int count) {
  if (count < 1) throw SolverError(ErrorKind::InvalidArgument, "basis count must be positive");
  return BasisFamily(BasisKind::ShiftedLegendre, count, 0.0);
}

BasisFamily BasisFamily::hat_1d(double half_width) {
  if (!(half_width > 0.0)) throw SolverError(ErrorKind::InvalidArgument, "hat half-width must be > 0");
  return BasisFamily(BasisKind::Hat1D, 1, half_width);
}

BasisFamily BasisFamily::gaussian_rbf(double width) {
  if (!(width > 0.0)) throw SolverError(ErrorKind::InvalidArgument, "RBF width must be > 0");
  return BasisFamily(BasisKind::GaussianRBF, 1, width);
}

int BasisFamily::dimension() const {
  return (kind_ == BasisKind::TensorSine2D || kind_ == BasisKind::GaussianRBF) ? 2 : 1;
}

std::pair<int, int> BasisFamily::tensor_mode(int index) const {
  if (kind_ != BasisKind::TensorSine2D) {
    throw SolverError(ErrorKind::InvalidArgument, "tensor_mode needs a TensorSine2D family");
  }
  check_index(*this, index);
  return {(index - 1) / per_axis_ + 1, (index - 1) % per_axis_ + 1};
}

double BasisFamily::frequency(int index) const {
  check_index(*this, index);
  switch (kind_) {
    case BasisKind::Sine1D: return index;
    case BasisKind::ClampedBeamSine: return (2.0 * index - 1.0) / 2.0;
    case BasisKind::TensorSine2D: {
      auto [a, b] = tensor_mode(index);
      return std::max(a, b);
    }
    default:
      throw SolverError(ErrorKind::InvalidArgument, "frequency defined for sine families only");
  }
}

double eval_basis(const BasisFamily& family, int index, double x, int derivative) {
  check_index(family, index);
  check_unit(x);
  switch (family.kind()) {
    case BasisKind::Sine1D:
      return sine_derivative(index * kPi, x, derivative);
    case BasisKind::ClampedBeamSine:
      return sine_derivative((2.0 * index - 1.0) * kPi / 2.0, x, derivative);
    case BasisKind::ShiftedLegendre: {
      if (derivative < 0 || derivative > 3) {
        throw SolverError(ErrorKind::InvalidArgument, "derivative order must be 0..3");
      }
      return std::pow(2.0, derivative) * legendre_derivative(index - 1, 2.0 * x - 1.0, derivative);
    }
    default:
      throw SolverError(ErrorKind::InvalidArgument, "not a univariate solution basis");
  }
}

double eval_basis(const BasisFamily& family, int index, Point2 x) {
  check_unit(x.x1);
  check_unit(x.x2);
  auto [a, b] = family.tensor_mode(index);
  return std::sin(a * kPi * x.x1) * std::sin(b * kPi * x.x2);
}

std::array<double, 2> eval_basis_grad(const BasisFamily& family, int index, Point2 x) {
  check_unit(x.x1);
  check_unit(x.x2);
  auto [a, b] = family.tensor_mode(index);
  const double ka = a * kPi;
  const double kb = b * kPi;
  return {ka * std::cos(ka * x.x1) * std::sin(kb * x.x2),
          kb * std::sin(ka * x.x1) * std::cos(kb * x.x2)};
}

double eval_constraint_shape(const BasisFamily& family, double center, double x) {
  if (family.kind() != BasisKind::Hat1D) {
    throw SolverError(ErrorKind::InvalidArgument, "1D constraint shape requires Hat1D");
  }
  return std::max(0.0, 1.0 - std::abs(x - center) / family.half_width());
}

double eval_constraint_shape(const BasisFamily& family, Point2 center, Point2 x) {
  if (family.kind() != BasisKind::GaussianRBF) {
    throw SolverError(ErrorKind::InvalidArgument, "2D constraint shape requires GaussianRBF");
  }
  const double w = family.rbf_width();
  const double d1 = x.x1 - center.x1;
  const double d2 = x.x2 - center.x2;
  return w / kPi * std::exp(-w * (d1 * d1 + d2 * d2));
}

namespace {

// Nodes and weights on [-1, 1].
void legendre_nodes(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double s = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = s;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * s * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (s * p1 - p0) / (s * s - 1.0);
      const double step = p1 / dp;
      s -= step;
      if (std::abs(step) < 1e-16) break;
    }
    // recompute the derivative at the converged node
    double p0 = 1.0;
    double p1 = s;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * s * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (s * p1 - p0) / (s * s - 1.0);
    const double w = 2.0 / ((1.0 - s * s) * dp * dp);
    nodes[i] = -s;
    nodes[n - 1 - i] = s;
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
}

}  // namespace

QuadratureRule gauss_legendre(int order, int dimension) {
  if (order < 1) throw SolverError(ErrorKind::InvalidArgument, "quadrature order must be >= 1");
  if (dimension != 1 && dimension != 2) {
    throw SolverError(ErrorKind::InvalidArgument, "quadrature dimension must be 1 or 2");
  }
  std::vector<double> s, w;
  if (order == 1) {
    s = {0.0};
    w = {2.0};
  } else {
    legendre_nodes(order, s, w);
  }
  QuadratureRule rule;
  rule.dimension = dimension;
  if (dimension == 1) {
    for (int i = 0; i < order; ++i) {
      rule.points.push_back({0.5 * (s[i] + 1.0), 0.0});
      rule.weights.push_back(0.5 * w[i]);
    }
  } else {
    for (int i = 0; i < order; ++i) {
      for (int j = 0; j < order; ++j) {
        rule.points.push_back({0.5 * (s[i] + 1.0), 0.5 * (s[j] + 1.0)});
        rule.weights.push_back(0.25 * w[i] * w[j]);
      }
    }
  }
  return rule;
}

QuadratureRule composite_gauss_legendre(int order, const std::vector<double>& breakpoints) {
  std::vector<double> cuts = breakpoints;
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  if (cuts.size() < 2) throw SolverError(ErrorKind::InvalidArgument, "need at least two breakpoints");
  const QuadratureRule unit = gauss_legendre(order, 1);
  QuadratureRule rule;
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double a = cuts[p];
    const double len = cuts[p + 1] - a;
    for (std::size_t q = 0; q < unit.size(); ++q) {
      rule.points.push_back({a + len * unit.points[q].x1, 0.0});
      rule.weights.push_back(len * unit.weights[q]);
    }
  }
  return rule;
}

QuadratureRule panel_gauss_legendre(int order, double a, double b, int panels) {
  if (panels < 1) throw SolverError(ErrorKind::InvalidArgument, "panel count must be >= 1");
  std::vector<double> cuts(panels + 1);
  for (int p = 0; p <= panels; ++p) cuts[p] = a + (b - a) * p / panels;
  return composite_gauss_legendre(order, cuts);
}

double integrate(const QuadratureRule& rule, const std::function<double(double)>& f) {
  double sum = 0.0;
  for (std::size_t q = 0; q < rule.size(); ++q) sum += rule.weights[q] * f(rule.points[q].x1);
  return sum;
}

double integrate(const QuadratureRule& rule, const std::function<double(Point2)>& f) {
  double sum = 0.0;
  for (std::size_t q = 0; q < rule.size(); ++q) sum += rule.weights[q] * f(rule.points[q]);
  return sum;
}

int quadrature_order_for(double max_frequency, int minimum) {
  // fitted to the smallest n with |error| < 1e-15 on cos/sin(w pi x), w <= 300
  return std::max(minimum, static_cast<int>(std::ceil(1.25 * max_frequency)) + 14);
}

}  // namespace ecfm
