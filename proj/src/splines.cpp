#include "flexjm/splines.hpp"

#include <algorithm>
#include <cmath>

#include "flexjm/errors.hpp"
#include "flexjm/stats.hpp"

namespace flexjm {

void BasisSpec::validate() const {
  if (!(upper > lower))
    throw ConfigError("basis domain is degenerate: [" + std::to_string(lower) +
                      ", " + std::to_string(upper) + "]");
  if (degree < 1) throw ConfigError("spline degree must be at least 1");
  if (n_basis < degree + 1)
    throw ConfigError("need at least degree + 1 basis functions, got " +
                      std::to_string(n_basis));
  if (diff_order < 1 || diff_order >= n_basis)
    throw ConfigError("difference order must be in [1, n_basis)");
}

std::vector<double> BasisSpec::knots() const {
  validate();
  const double h = step();
  std::vector<double> k(n_basis + degree + 1);
  for (int j = 0; j < static_cast<int>(k.size()); ++j)
    k[j] = lower + (j - degree) * h;
  return k;
}

BasisEval::BasisEval(const BasisSpec& spec) : spec_(spec), knots_(spec.knots()) {}

void BasisEval::row(double x, int deriv, double* out) const {
  const int l = spec_.degree;
  const int p = spec_.n_basis;
  if (deriv < 0 || deriv > l)
    throw ConfigError("derivative order " + std::to_string(deriv) +
                      " exceeds spline degree " + std::to_string(l));
  std::fill(out, out + p, 0.0);

  // Knot span containing x, clamped to the boundary spans so that points
  // outside the domain evaluate the boundary polynomials.
  const int m = spec_.n_interior();
  int j = l + static_cast<int>(std::floor((x - spec_.lower) / spec_.step()));
  j = std::clamp(j, l, l + m);

  // Degree l - deriv values on span j (Cox-de Boor triangle, local form).
  const int q = l - deriv;
  double vals[32];
  double left[32], right[32];
  vals[0] = 1.0;
  for (int d = 1; d <= q; ++d) {
    left[d] = x - knots_[j + 1 - d];
    right[d] = knots_[j + d] - x;
    double saved = 0.0;
    for (int r = 0; r < d; ++r) {
      const double tmp = vals[r] / (right[r + 1] + left[d - r]);
      vals[r] = saved + right[r + 1] * tmp;
      saved = left[d - r] * tmp;
    }
    vals[d] = saved;
  }
  // vals[r] now holds B_{j-q+r, q}(x) for r = 0..q.

  // Lift to the deriv-th derivative of the degree-l basis:
  // B'_{i,d}(x) = d [ B_{i,d-1}/(k_{i+d} - k_i) - B_{i+1,d-1}/(k_{i+d+1} - k_{i+1}) ].
  double cur[32];
  std::copy(vals, vals + q + 1, cur);
  for (int d = q + 1; d <= l; ++d) {
    double nxt[32];
    for (int r = 0; r <= d; ++r) {
      const int i = j - d + r;
      const double a = (r > 0) ? cur[r - 1] / (knots_[i + d] - knots_[i]) : 0.0;
      const double b =
          (r < d) ? cur[r] / (knots_[i + d + 1] - knots_[i + 1]) : 0.0;
      nxt[r] = d * (a - b);
    }
    std::copy(nxt, nxt + d + 1, cur);
  }
  for (int r = 0; r <= l; ++r) out[j - l + r] = cur[r];
}

Eigen::MatrixXd bspline_basis(const Eigen::VectorXd& x, const BasisSpec& spec,
                              int deriv) {
  BasisEval ev(spec);
  Eigen::MatrixXd B(x.size(), spec.n_basis);
  std::vector<double> buf(spec.n_basis);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    ev.row(x[i], deriv, buf.data());
    for (int c = 0; c < spec.n_basis; ++c) B(i, c) = buf[c];
  }
  return B;
}

Eigen::MatrixXd difference_matrix(int p, int r) {
  if (r < 1 || r >= p)
    throw ConfigError("difference order must satisfy 1 <= r < p");
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(p, p);
  for (int pass = 0; pass < r; ++pass) {
    const Eigen::Index rows = D.rows() - 1;
    Eigen::MatrixXd Dn(rows, p);
    for (Eigen::Index i = 0; i < rows; ++i)
      Dn.row(i) = D.row(i + 1) - D.row(i);
    D = std::move(Dn);
  }
  return D;
}

Eigen::MatrixXd difference_penalty(int p, int r) {
  const Eigen::MatrixXd D = difference_matrix(p, r);
  return D.transpose() * D;
}

Eigen::MatrixXd row_tensor(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.rows() != B.rows())
    throw ConfigError("row_tensor: row counts differ");
  const Eigen::Index n = A.rows(), pa = A.cols(), pb = B.cols();
  Eigen::MatrixXd T(n, pa * pb);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index ja = 0; ja < pa; ++ja)
      for (Eigen::Index jb = 0; jb < pb; ++jb)
        T(i, ja * pb + jb) = A(i, ja) * B(i, jb);
  return T;
}

Eigen::MatrixXd anisotropic_penalty(const Eigen::MatrixXd& K1,
                                    const Eigen::MatrixXd& K2, double tau1sq,
                                    double tau2sq) {
  if (K1.rows() != K1.cols() || K2.rows() != K2.cols())
    throw ConfigError("anisotropic_penalty: marginal penalties must be square");
  if (!(tau1sq > 0.0) || !(tau2sq > 0.0))
    throw ConfigError("anisotropic_penalty: variances must be positive");
  const Eigen::Index p1 = K1.rows(), p2 = K2.rows();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(p1 * p2, p1 * p2);
  for (Eigen::Index i = 0; i < p1; ++i)
    for (Eigen::Index j = 0; j < p1; ++j)
      if (K1(i, j) != 0.0)
        for (Eigen::Index k = 0; k < p2; ++k)
          P(i * p2 + k, j * p2 + k) += K1(i, j) / tau1sq;
  for (Eigen::Index i = 0; i < p1; ++i)
    for (Eigen::Index k = 0; k < p2; ++k)
      for (Eigen::Index l = 0; l < p2; ++l)
        if (K2(k, l) != 0.0) P(i * p2 + k, i * p2 + l) += K2(k, l) / tau2sq;
  return P;
}

Eigen::MatrixXd constraint_nullspace(const Eigen::VectorXd& c) {
  const Eigen::Index p = c.size();
  const double scale = c.cwiseAbs().maxCoeff();
  if (!(scale > 1e-12))
    throw ConfigError(
        "centering constraint is vacuous: design columns already sum to zero");
  // Householder reflection mapping c to a multiple of e1; the remaining
  // columns of the reflector span the null space of c'.
  Eigen::VectorXd v = c / c.norm();
  v[0] += (v[0] >= 0.0 ? 1.0 : -1.0);
  v /= v.norm();
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(p, p) - 2.0 * v * v.transpose();
  return Q.rightCols(p - 1);
}

CenteredTerm sum_to_zero(const Eigen::MatrixXd& X, const Eigen::MatrixXd& K) {
  if (K.rows() != X.cols() || K.cols() != X.cols())
    throw ConfigError("sum_to_zero: penalty does not match design width");
  CenteredTerm out;
  const Eigen::VectorXd c = X.colwise().sum();
  out.Z = constraint_nullspace(c);
  out.X = X * out.Z;
  out.K = out.Z.transpose() * K * out.Z;
  return out;
}

AlphaConstraint alpha_grid_constraint(const Eigen::VectorXd& y_obs, int n_basis,
                                      int degree, int diff_order,
                                      int grid_size) {
  if (y_obs.size() < 2)
    throw DataError("association domain needs at least two observed responses");
  if (grid_size < 2) throw ConfigError("association grid needs >= 2 points");
  Eigen::VectorXd s = y_obs;
  std::sort(s.data(), s.data() + s.size());
  const double lo = quantile_type7(s, 0.025);
  const double hi = quantile_type7(s, 0.975);
  if (!(hi > lo))
    throw DataError("association domain is degenerate: response quantiles coincide");

  AlphaConstraint out;
  out.basis = BasisSpec{lo, hi, n_basis, degree, diff_order};
  out.basis.validate();
  out.grid.resize(grid_size);
  for (int i = 0; i < grid_size; ++i)
    out.grid[i] = lo + (hi - lo) * i / (grid_size - 1.0);

  const Eigen::MatrixXd B = bspline_basis(out.grid, out.basis, 0);
  out.Z = constraint_nullspace(B.colwise().sum());
  const Eigen::MatrixXd K = difference_penalty(n_basis, diff_order);
  out.K = out.Z.transpose() * K * out.Z;
  return out;
}

}  // namespace flexjm
