#pragma once

#include <Eigen/Dense>
#include <vector>

namespace flexjm {

// Equidistant B-spline basis of `degree` on [lower, upper] with n_basis
// functions, i.e. n_basis - degree - 1 interior knots plus degree extra
// knots extended beyond each boundary. diff_order is the order of the
// random-walk penalty attached to the coefficients.
struct BasisSpec {
  double lower = 0.0;
  double upper = 1.0;
  int n_basis = 6;
  int degree = 3;
  int diff_order = 2;

  int n_interior() const { return n_basis - degree - 1; }
  double step() const { return (upper - lower) / (n_interior() + 1); }
  // Full extended knot vector, n_basis + degree + 1 values.
  std::vector<double> knots() const;
  void validate() const;
};

// Evaluates basis rows and derivatives. Evaluation outside [lower, upper]
// continues the boundary polynomial pieces (the de Boor triangle is run with
// the span clamped to the boundary interval), so values and derivatives stay
// mutually consistent off the domain.
class BasisEval {
 public:
  explicit BasisEval(const BasisSpec& spec);

  int size() const { return spec_.n_basis; }
  const BasisSpec& spec() const { return spec_; }

  // Writes all n_basis values of the deriv-th derivative at x into out.
  void row(double x, int deriv, double* out) const;

 private:
  BasisSpec spec_;
  std::vector<double> knots_;
};

// Basis (or derivative) matrix at the given points, size x.size() x n_basis.
Eigen::MatrixXd bspline_basis(const Eigen::VectorXd& x, const BasisSpec& spec,
                              int deriv = 0);

// r-th order difference matrix, (p - r) x p.
Eigen::MatrixXd difference_matrix(int p, int r);

// Random-walk penalty K = D_r' D_r, p x p with rank p - r.
Eigen::MatrixXd difference_penalty(int p, int r);

// Row-wise tensor product: row i is the Kronecker product of A.row(i) and
// B.row(i), with A-major column ordering (a1*b1, a1*b2, ..., a2*b1, ...).
Eigen::MatrixXd row_tensor(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

// Kronecker-sum smoothing precision (1/tau1sq) K1 (x) I  +  (1/tau2sq) I (x) K2.
Eigen::MatrixXd anisotropic_penalty(const Eigen::MatrixXd& K1,
                                    const Eigen::MatrixXd& K2, double tau1sq,
                                    double tau2sq);

// Sum-to-zero reparameterization after Wood (2006, ch. 1.8): Z is an
// orthonormal basis of the null space of the constraint 1'X beta = 0.
struct CenteredTerm {
  Eigen::MatrixXd X;  // X Z, one column fewer
  Eigen::MatrixXd K;  // Z' K Z
  Eigen::MatrixXd Z;  // p x (p-1)
};
CenteredTerm sum_to_zero(const Eigen::MatrixXd& X, const Eigen::MatrixXd& K);

// Constraint null space for 1'X beta = 0 alone.
Eigen::MatrixXd constraint_nullspace(const Eigen::VectorXd& colsums);

// Basis, grid, and constraint for a nonlinear association curve. The domain
// is the [2.5%, 97.5%] quantile range of the observed responses, the
// constraint enforces a zero sum over the fixed grid y*.
struct AlphaConstraint {
  BasisSpec basis;
  Eigen::VectorXd grid;  // y*
  Eigen::MatrixXd Z;     // n_basis x (n_basis - 1)
  Eigen::MatrixXd K;     // constrained penalty
};
AlphaConstraint alpha_grid_constraint(const Eigen::VectorXd& y_obs, int n_basis,
                                      int degree, int diff_order,
                                      int grid_size = 100);

}  // namespace flexjm
