#include "ecfm/stats.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <numbers>

namespace ecfm {
namespace {

void check_probability(double p) {
  if (!(p > 0.0 && p < 1.0)) throw SolverError(ErrorKind::InvalidArgument, "probability must lie in (0,1)");
}

// Acklam's rational approximation of the normal quantile (relative error ~1e-9).
double acklam(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double low = 0.02425;
  if (p < low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - low) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double chi2_pdf(double x, int dof) {
  if (x <= 0.0) return 0.0;
  const double k = 0.5 * dof;
  return std::exp((k - 1.0) * std::log(x) - 0.5 * x - k * std::numbers::ln2 - std::lgamma(k));
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  check_probability(p);
  if (p == 0.5) return 0.0;
  double x = acklam(p);
  // one Halley step on the CDF
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double chi2_cdf(double x, int dof) {
  if (dof < 1) throw SolverError(ErrorKind::InvalidArgument, "chi-squared needs dof >= 1");
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(0.5 * dof, 0.5 * x);
}

double chi2_quantile(double p, int dof) {
  check_probability(p);
  if (dof < 1) throw SolverError(ErrorKind::InvalidArgument, "chi-squared needs dof >= 1");
  const double k = dof;
  // Wilson-Hilferty start
  const double h = 2.0 / (9.0 * k);
  double x = k * std::pow(1.0 - h + normal_quantile(p) * std::sqrt(h), 3);
  double lo = 0.0;
  double hi = std::max(2.0 * k, 10.0);
  while (chi2_cdf(hi, dof) < p) hi *= 2.0;
  if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = chi2_cdf(x, dof) - p;
    if (f < 0.0) lo = x; else hi = x;
    const double slope = chi2_pdf(x, dof);
    double next = slope > 0.0 ? x - f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-14 * std::max(1.0, x)) return next;
    x = next;
  }
  return x;
}

ConfidenceBounds confidence_bounds(double sigma, int samples, double alpha) {
  if (sigma < 0.0) throw SolverError(ErrorKind::InvalidArgument, "sigma must be non-negative");
  if (samples < 2) throw SolverError(ErrorKind::InvalidArgument, "need at least two samples");
  check_probability(alpha);
  ConfidenceBounds b;
  b.alpha = alpha;
  b.samples = samples;
  b.mean_lower = normal_quantile(0.5 * alpha) * sigma / std::sqrt(static_cast<double>(samples));
  b.mean_upper = -b.mean_lower;
  const int dof = samples - 1;
  const double scale = sigma * sigma / dof;
  b.variance_lower = chi2_quantile(0.5 * alpha, dof) * scale;
  b.variance_upper = chi2_quantile(1.0 - 0.5 * alpha, dof) * scale;
  return b;
}

SampleMoments sample_moments(const Vector& e) {
  const double c = static_cast<double>(e.size());
  if (e.size() < 2) throw SolverError(ErrorKind::InvalidArgument, "sample moments need at least two values");
  const double sum = e.sum();
  SampleMoments m;
  m.mean = sum / c;
  m.variance = (e.squaredNorm() - sum * sum / c) / (c - 1.0);
  return m;
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Vector sample_noise(const NoiseModel& model, int n) {
  if (model.sigma < 0.0) throw SolverError(ErrorKind::InvalidArgument, "sigma must be non-negative");
  Rng rng(model.seed);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = model.sigma * rng.normal();
  return v;
}

Vector sample_uniform(std::uint64_t seed, int n) {
  Rng rng(seed);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform();
  return v;
}

}  // namespace ecfm
