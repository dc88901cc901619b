#pragma once

// Independent brute-force references used to derive expected values.

#include <cmath>
#include <functional>
#include <random>

#include "nips/linalg.hpp"

namespace testing {

using nips::Mat;
using nips::Vec;

/// Golden-section search for a convex 1-D function on [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo, double hi,
                         int iters = 200) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// Coordinate-wise minimizer of sum_i psi(x_i) + (x_i - y_i)^2 / (2 eta) over [lo, hi].
inline Vec separable_prox(const std::function<double(double)>& psi, const Vec& y, double eta,
                          double lo = -50.0, double hi = 50.0) {
  Vec x(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double yi = y[i];
    x[i] = golden_min([&](double v) { return psi(v) + (v - yi) * (v - yi) / (2.0 * eta); }, lo,
                      hi);
  }
  return x;
}

inline Vec uniform_vec(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

inline Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace testing
