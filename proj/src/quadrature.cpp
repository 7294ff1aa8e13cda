#include "flexjm/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace flexjm {

QuadratureRule QuadratureRule::gauss_legendre(int k) {
  if (k < 1) throw std::invalid_argument("gauss_legendre: need at least one node");
  QuadratureRule rule;
  rule.nodes.resize(k);
  rule.weights.resize(k);
  const double pi = 3.14159265358979323846;
  // Newton iteration on the Legendre polynomial, Chebyshev starting guesses.
  // Roots come in +/- pairs, so only the lower half is solved.
  const int m = (k + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(pi * (i + 0.75) / (k + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      // Three-term recurrence for P_k(x) and derivative.
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= k; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = k * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[k - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[i] = w;
    rule.weights[k - 1 - i] = w;
  }
  if (k % 2 == 1) rule.nodes[k / 2] = 0.0;  // exact midpoint for odd rules
  return rule;
}

void QuadratureRule::rescale(double upper, Eigen::VectorXd& u, Eigen::VectorXd& w) const {
  const double h = 0.5 * upper;
  u = (nodes.array() + 1.0) * h;
  w = weights * h;
}

}  // namespace flexjm
