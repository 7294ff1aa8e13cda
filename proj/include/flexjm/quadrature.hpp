#pragma once

#include <Eigen/Dense>

namespace flexjm {

// Gauss-Legendre rule on [-1, 1]. A k-node rule integrates polynomials up to
// degree 2k-1 exactly.
struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  static QuadratureRule gauss_legendre(int k);

  // Nodes/weights rescaled from [-1, 1] to [0, upper].
  void rescale(double upper, Eigen::VectorXd& u, Eigen::VectorXd& w) const;
};

}  // namespace flexjm
