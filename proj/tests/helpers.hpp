#pragma once

#include "ecfm/linalg.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace testing {

inline ecfm::Vector central_gradient(const std::function<double(const ecfm::Vector&)>& f, const ecfm::Vector& x,
                                     double h) {
  ecfm::Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    ecfm::Vector a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline ecfm::Matrix central_jacobian(const std::function<ecfm::Vector(const ecfm::Vector&)>& f,
                                     const ecfm::Vector& x, double h) {
  const ecfm::Vector f0 = f(x);
  ecfm::Matrix j(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    ecfm::Vector a = x, b = x;
    a(i) += h;
    b(i) -= h;
    j.col(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return j;
}

// max |a - b| / max(|b|_inf, floor)
inline double rel_err(const ecfm::Matrix& a, const ecfm::Matrix& b, double floor = 1e-300) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), floor);
}

inline ecfm::Vector random_vector(int n, unsigned seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  ecfm::Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = d(gen);
  return v;
}

}  // namespace testing
