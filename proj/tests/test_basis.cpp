#include "ecfm/basis.hpp"
#include "ecfm/linalg.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ecfm;

TEST_CASE("basis evaluation examples") {
  CHECK(eval_basis(BasisFamily::sine_1d(3), 1, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(eval_basis(BasisFamily::clamped_beam_sine(3), 1, 0.0)) < 1e-15);
  CHECK(std::abs(eval_basis(BasisFamily::sine_1d(3), 3, 1.0 / 3.0)) < 1e-14);
}

TEST_CASE("basis index and domain errors") {
  const auto s = BasisFamily::sine_1d(3);
  CHECK_THROWS_AS(eval_basis(s, 0, 0.5), SolverError);
  CHECK_THROWS_AS(eval_basis(s, 4, 0.5), SolverError);
  CHECK_THROWS_AS(eval_basis(s, 1, 1.5), SolverError);
  CHECK_THROWS_AS(eval_constraint_shape(s, 0.5, 0.5), SolverError);
}

TEST_CASE("boundary conditions built into the bases") {
  const auto s = BasisFamily::sine_1d(50);
  const auto b = BasisFamily::clamped_beam_sine(15);
  for (int i = 1; i <= 50; ++i) {
    CHECK(std::abs(eval_basis(s, i, 0.0)) < 1e-14);
    CHECK(std::abs(eval_basis(s, i, 1.0)) < 1e-12);
  }
  for (int i = 1; i <= 15; ++i) {
    CHECK(std::abs(eval_basis(b, i, 0.0, 0)) < 1e-14);
    CHECK(std::abs(eval_basis(b, i, 0.0, 2)) < 1e-12);
    CHECK(std::abs(eval_basis(b, i, 1.0, 1)) < 1e-12);
    CHECK(std::abs(eval_basis(b, i, 1.0, 3)) < 1e-9);
  }
  const auto t = BasisFamily::tensor_sine_2d(16);
  for (int k = 1; k <= 16; ++k) {
    CHECK(std::abs(eval_basis(t, k, Point2{0.0, 0.3})) < 1e-14);
    CHECK(std::abs(eval_basis(t, k, Point2{0.7, 1.0})) < 1e-12);
  }
}

TEST_CASE("tensor sine ordering uses the first axis as the slow index") {
  const auto t = BasisFamily::tensor_sine_2d(9);
  const auto [a, b] = t.tensor_mode(4);
  CHECK(a == 2);
  CHECK(b == 1);
  const Point2 x{0.3, 0.2};
  CHECK(eval_basis(t, 4, x) == doctest::Approx(std::sin(2 * M_PI * 0.3) * std::sin(M_PI * 0.2)).epsilon(1e-14));
}

TEST_CASE("derivatives agree with central differences at random interior points") {
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  const double h = 1e-6;
  for (const auto& fam : {BasisFamily::sine_1d(5), BasisFamily::clamped_beam_sine(5), BasisFamily::shifted_legendre(5)}) {
    for (int trial = 0; trial < 100; ++trial) {
      const double x = u(gen);
      for (int i = 1; i <= 5; ++i) {
        for (int d = 0; d < 2; ++d) {
          const double fd = (eval_basis(fam, i, x + h, d) - eval_basis(fam, i, x - h, d)) / (2 * h);
          const double an = eval_basis(fam, i, x, d + 1);
          CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(an)));
        }
      }
    }
  }
  const auto t = BasisFamily::tensor_sine_2d(9);
  for (int trial = 0; trial < 100; ++trial) {
    const Point2 x{u(gen), u(gen)};
    for (int k = 1; k <= 9; ++k) {
      const auto g = eval_basis_grad(t, k, x);
      const double f1 = (eval_basis(t, k, Point2{x.x1 + h, x.x2}) - eval_basis(t, k, Point2{x.x1 - h, x.x2})) / (2 * h);
      const double f2 = (eval_basis(t, k, Point2{x.x1, x.x2 + h}) - eval_basis(t, k, Point2{x.x1, x.x2 - h})) / (2 * h);
      CHECK(std::abs(f1 - g[0]) <= 1e-6 * std::max(1.0, std::abs(g[0])));
      CHECK(std::abs(f2 - g[1]) <= 1e-6 * std::max(1.0, std::abs(g[1])));
    }
  }
}

TEST_CASE("shifted Legendre orthogonality") {
  const auto leg = BasisFamily::shifted_legendre(8);
  const auto rule = gauss_legendre(10);
  for (int m = 1; m <= 8; ++m) {
    for (int n = 1; n <= 8; ++n) {
      const double v = integrate(rule, [&](double w) { return eval_basis(leg, m, w) * eval_basis(leg, n, w); });
      const double expect = m == n ? 1.0 / (2 * (n - 1) + 1) : 0.0;
      CHECK(std::abs(v - expect) < 1e-13);
    }
  }
  CHECK(eval_basis(leg, 2, 0.25) == doctest::Approx(-0.5));
}

TEST_CASE("constraint shapes") {
  const auto rbf = BasisFamily::gaussian_rbf(500.0);
  CHECK(eval_constraint_shape(rbf, Point2{0.3, 0.4}, Point2{0.3, 0.4}) == doctest::Approx(500.0 / M_PI));
  const auto hat = BasisFamily::hat_1d(0.2);
  CHECK(eval_constraint_shape(hat, 0.5, 0.5) == doctest::Approx(1.0));
  CHECK(eval_constraint_shape(hat, 0.5, 0.8) == 0.0);
  CHECK(eval_constraint_shape(hat, 0.5, 0.6) == doctest::Approx(0.5));
}

TEST_CASE("RBF integrates to one over the unit square") {
  for (double w : {100.0, 500.0}) {
    const auto rbf = BasisFamily::gaussian_rbf(w);
    const auto rule = panel_gauss_legendre(10, 0.0, 1.0, 40);
    // separable: (w/pi) exp(-w r^2) = sqrt(w/pi) exp(-w x^2) * sqrt(w/pi) exp(-w y^2)
    const double axis = integrate(rule, [&](double x) { return std::sqrt(w / M_PI) * std::exp(-w * (x - 0.5) * (x - 0.5)); });
    CHECK(std::abs(axis * axis - 1.0) < 1e-6);
    // and via the 2D shape evaluation on a tensor rule
    double total = 0.0;
    for (std::size_t a = 0; a < rule.size(); ++a) {
      for (std::size_t b = 0; b < rule.size(); ++b) {
        total += rule.weights[a] * rule.weights[b] *
                 eval_constraint_shape(rbf, Point2{0.5, 0.5}, Point2{rule.points[a].x1, rule.points[b].x1});
      }
    }
    CHECK(std::abs(total - 1.0) < 1e-6);
  }
}

TEST_CASE("Gauss-Legendre examples and exactness") {
  CHECK(integrate(gauss_legendre(1), [](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(integrate(gauss_legendre(2), [](double x) { return x * x; }) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(std::abs(integrate(gauss_legendre(12), [](double x) { return std::sin(M_PI * x) * std::sin(M_PI * x); }) - 0.5) <
        1e-10);
  for (int p = 1; p <= 12; ++p) {
    const auto rule = gauss_legendre(p);
    double wsum = 0.0;
    for (double w : rule.weights) {
      CHECK(w > 0.0);
      wsum += w;
    }
    CHECK(std::abs(wsum - 1.0) < 1e-13);
    const int deg = 2 * p - 1;
    const double v = integrate(rule, [&](double x) { return std::pow(x, deg); });
    CHECK(std::abs(v - 1.0 / (deg + 1)) < 1e-12 / (deg + 1) * 10);
  }
  const auto r2 = gauss_legendre(3, 2);
  CHECK(r2.dimension == 2);
  CHECK(integrate(r2, [](Point2 x) { return x.x1 * x.x1 * x.x2; }) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK_THROWS_AS(gauss_legendre(3, 3), SolverError);
  CHECK_THROWS_AS(gauss_legendre(0), SolverError);
}

TEST_CASE("sine orthogonality with the assembly quadrature order") {
  const auto s = BasisFamily::sine_1d(50);
  const auto rule = gauss_legendre(quadrature_order_for(100.0));
  double worst = 0.0;
  for (int i = 1; i <= 50; ++i) {
    for (int j = 1; j <= 50; ++j) {
      const double v = integrate(rule, [&](double x) { return eval_basis(s, i, x) * eval_basis(s, j, x); });
      worst = std::max(worst, std::abs(v - (i == j ? 0.5 : 0.0)));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("composite rule handles a jump at the breakpoints exactly") {
  const auto rule = composite_gauss_legendre(4, {0.0, 0.25, 0.75, 1.0});
  const double v = integrate(rule, [](double x) { return (x >= 0.25 && x <= 0.75) ? 1.0 : 0.0; });
  CHECK(v == doctest::Approx(0.5).epsilon(1e-14));
}
