#pragma once

#include <Eigen/Dense>

namespace flexjm {

// Regularized lower incomplete gamma P(a, x); series expansion for
// x < a + 1, Lentz continued fraction for the complement otherwise.
double igamma_lower(double a, double x);
inline double igamma_upper(double a, double x) { return 1.0 - igamma_lower(a, x); }

// CDF of the inverse gamma distribution with shape a and scale b.
inline double inv_gamma_cdf(double x, double a, double b) {
  if (x <= 0.0) return 0.0;
  return igamma_upper(a, b / x);
}

// Log density of the inverse gamma distribution, including the normalizer.
double inv_gamma_logpdf(double x, double a, double b);

double normal_cdf(double z);

// Type-7 sample quantile (linear interpolation between order statistics).
double quantile_type7(Eigen::VectorXd sorted_ascending, double prob);

}  // namespace flexjm
