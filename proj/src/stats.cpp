#include "flexjm/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace flexjm {

namespace {

double igamma_series(double a, double x) {
  // P(a,x) = x^a e^-x / Gamma(a+1) * sum_k x^k / ((a+1)...(a+k))
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int k = 0; k < 500; ++k) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double igamma_cf(double a, double x) {
  // Q(a,x) via modified Lentz continued fraction.
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double igamma_lower(double a, double x) {
  if (!(a > 0.0)) throw std::invalid_argument("igamma_lower: a must be > 0");
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return igamma_series(a, x);
  return 1.0 - igamma_cf(a, x);
}

double inv_gamma_logpdf(double x, double a, double b) {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(x) - b / x;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double quantile_type7(Eigen::VectorXd s, double prob) {
  const Eigen::Index n = s.size();
  if (n == 0) throw std::invalid_argument("quantile of empty vector");
  if (n == 1) return s[0];
  const double h = (n - 1) * prob;
  const Eigen::Index lo = static_cast<Eigen::Index>(std::floor(h));
  if (lo >= n - 1) return s[n - 1];
  const double frac = h - lo;
  return s[lo] + frac * (s[lo + 1] - s[lo]);
}

}  // namespace flexjm
