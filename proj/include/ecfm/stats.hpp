#pragma once

#include "ecfm/linalg.hpp"

#include <cstdint>
#include <random>

namespace ecfm {

/// Inverse standard-normal CDF (absolute error below 1e-8 on (0,1)).
double normal_quantile(double p);
double normal_cdf(double x);

/// Chi-squared CDF and its inverse for `dof` degrees of freedom.
double chi2_cdf(double x, int dof);
double chi2_quantile(double p, int dof);

/// Confidence limits for the sample mean and unbiased sample variance of C
/// i.i.d. N(0, sigma^2) draws at significance alpha.
struct ConfidenceBounds {
  double mean_lower = 0.0;      // l1
  double mean_upper = 0.0;      // l2 = -l1
  double variance_lower = 0.0;  // p1
  double variance_upper = 0.0;  // p2
  double alpha = 0.05;
  int samples = 0;
};

ConfidenceBounds confidence_bounds(double sigma, int samples, double alpha);

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;  // normalized by C - 1
};

SampleMoments sample_moments(const Vector& e);

struct NoiseModel {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// The repo-wide generator: std::mt19937_64 (bit-exact across platforms) with
/// 53-bit uniforms and Box-Muller normals, so every seeded stream is
/// reproducible independent of the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();  // [0, 1)
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Vector sample_noise(const NoiseModel& model, int n);
Vector sample_uniform(std::uint64_t seed, int n);

}  // namespace ecfm
