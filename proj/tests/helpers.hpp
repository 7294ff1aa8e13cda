#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "flexjm/rng.hpp"

namespace testutil {

// Central finite difference of a scalar function.
inline double fd_deriv(const std::function<double(double)>& f, double x,
                       double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Central finite-difference gradient.
inline Eigen::VectorXd fd_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    xp[i] = xi + h;
    const double fu = f(xp);
    xp[i] = xi - h;
    const double fl = f(xp);
    xp[i] = xi;
    g[i] = (fu - fl) / (2.0 * h);
  }
  return g;
}

inline double rel_err(double got, double want) {
  const double scale = std::max({std::fabs(got), std::fabs(want), 1e-10});
  return std::fabs(got - want) / scale;
}

// Max relative elementwise error with an absolute floor.
inline double max_rel_err(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want,
                          double floor = 1e-8) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < got.rows(); ++i)
    for (Eigen::Index j = 0; j < got.cols(); ++j) {
      const double denom =
          std::max({std::fabs(got(i, j)), std::fabs(want(i, j)), floor});
      worst = std::max(worst, std::fabs(got(i, j) - want(i, j)) / denom);
    }
  return worst;
}

// One-sample Kolmogorov-Smirnov test against a continuous CDF; returns the
// asymptotic p-value.
inline double ks_test(std::vector<double> x,
                      const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = cdf(x[i]);
    d = std::max(d, std::fabs(F - i / n));
    d = std::max(d, std::fabs((i + 1) / n - F));
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k)
    p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

// Two-sample Kolmogorov-Smirnov p-value.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::fabs(i / na - j / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k)
    p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace testutil
