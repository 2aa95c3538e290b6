#include "ecfm/stats.hpp"

#include <doctest.h>

#include <cmath>

using namespace ecfm;

TEST_CASE("normal quantile") {
  CHECK(std::abs(normal_quantile(0.5)) < 1e-12);
  CHECK(std::abs(normal_quantile(0.025) + 1.96) <= 0.005);
  CHECK(normal_quantile(0.975) == doctest::Approx(-normal_quantile(0.025)).epsilon(1e-12));
  for (double p : {1e-10, 1e-4, 0.01, 0.2, 0.5, 0.7, 0.99, 1 - 1e-6}) {
    CHECK(std::abs(normal_cdf(normal_quantile(p)) - p) < 1e-8 * std::max(p, 1e-2));
  }
  CHECK_THROWS_AS(normal_quantile(0.0), SolverError);
  CHECK_THROWS_AS(normal_quantile(1.0), SolverError);
}

TEST_CASE("chi-squared quantile") {
  CHECK(std::abs(chi2_quantile(0.025, 224) - 184.44) <= 0.05);
  CHECK(std::abs(chi2_quantile(0.975, 224) - 267.35) <= 0.05);
  CHECK(chi2_quantile(0.5, 2) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-8));
  for (int dof : {1, 2, 10, 224}) {
    for (int k = 1; k <= 99; ++k) {
      const double p = k / 100.0;
      CHECK(std::abs(chi2_cdf(chi2_quantile(p, dof), dof) - p) <= 1e-6 * p);
    }
  }
  CHECK_THROWS_AS(chi2_quantile(0.5, 0), SolverError);
  CHECK_THROWS_AS(chi2_quantile(1.5, 3), SolverError);
}

TEST_CASE("confidence bounds") {
  const auto b = confidence_bounds(0.05, 225, 0.05);
  CHECK(b.mean_lower == doctest::Approx(-1.96 * 0.05 / 15).epsilon(2e-3));
  CHECK(b.mean_upper == -b.mean_lower);
  CHECK(b.variance_lower == doctest::Approx(184.44 * 0.0025 / 224).epsilon(1e-3));
  CHECK(b.variance_upper == doctest::Approx(267.35 * 0.0025 / 224).epsilon(1e-3));
  const auto z = confidence_bounds(0.0, 225, 0.05);
  CHECK(z.mean_lower == 0.0);
  CHECK(z.variance_upper == 0.0);
  const auto d = confidence_bounds(0.1, 225, 0.05);
  CHECK(d.mean_lower == doctest::Approx(2 * b.mean_lower).epsilon(1e-14));
  CHECK(d.variance_upper == doctest::Approx(4 * b.variance_upper).epsilon(1e-14));
  const auto wide = confidence_bounds(0.05, 225, 1.0 - 1e-9);
  CHECK(wide.mean_lower < 0.0);
  CHECK(wide.mean_lower > -1e-8);
}

TEST_CASE("sample moments") {
  auto m = sample_moments((Vector(3) << 1, 2, 3).finished());
  CHECK(m.mean == doctest::Approx(2.0));
  CHECK(m.variance == doctest::Approx(1.0));
  m = sample_moments(Vector::Constant(10, 4.5));
  CHECK(m.mean == doctest::Approx(4.5));
  CHECK(std::abs(m.variance) < 1e-14);
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    Vector e(20);
    for (int i = 0; i < 20; ++i) e(i) = 5.0 + rng.normal();
    double mean = 0, m2 = 0;
    for (int i = 0; i < 20; ++i) {
      const double d = e(i) - mean;
      mean += d / (i + 1);
      m2 += d * (e(i) - mean);
    }
    const auto s = sample_moments(e);
    CHECK(std::abs(s.mean - mean) < 1e-12);
    CHECK(std::abs(s.variance - m2 / 19) < 1e-12);
  }
}

TEST_CASE("random streams") {
  CHECK(sample_noise(NoiseModel{0.0, 4}, 10).norm() == 0.0);
  CHECK(sample_noise(NoiseModel{0.3, 4}, 50) == sample_noise(NoiseModel{0.3, 4}, 50));
  CHECK(sample_uniform(9, 50) == sample_uniform(9, 50));
  CHECK(sample_noise(NoiseModel{0.3, 4}, 50) != sample_noise(NoiseModel{0.3, 5}, 50));
  const Vector big = sample_noise(NoiseModel{1.0, 1}, 1000000);
  CHECK(std::abs(big.mean()) < 4.0 / 1000.0);
  const Vector u = sample_uniform(2, 100000);
  CHECK(u.minCoeff() >= 0.0);
  CHECK(u.maxCoeff() < 1.0);
}

TEST_CASE("empirical coverage of the bounds") {
  const auto b = confidence_bounds(1.0, 225, 0.05);
  Rng rng(11);
  int mean_in = 0, var_in = 0;
  const int trials = 10000;
  Vector e(225);
  for (int t = 0; t < trials; ++t) {
    for (int i = 0; i < 225; ++i) e(i) = rng.normal();
    const auto s = sample_moments(e);
    mean_in += (s.mean >= b.mean_lower && s.mean <= b.mean_upper);
    var_in += (s.variance >= b.variance_lower && s.variance <= b.variance_upper);
  }
  CHECK(std::abs(static_cast<double>(mean_in) / trials - 0.95) <= 0.01);
  CHECK(std::abs(static_cast<double>(var_in) / trials - 0.95) <= 0.01);
}
