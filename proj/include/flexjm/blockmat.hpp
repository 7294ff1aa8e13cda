#pragma once

#include <Eigen/Dense>
#include <vector>

#include "flexjm/rng.hpp"

namespace flexjm {

// Symmetric matrix in one of two layouts: dense, or block-diagonal with
// n_sub equal-sized blocks (one per subject). Random-intercept style terms
// have exactly that sparsity, and factorizing per-subject blocks instead of
// a dense 5n x 5n matrix is what keeps the samplers usable.
class BlockSym {
 public:
  static BlockSym dense(int p) {
    BlockSym m;
    m.blockdiag_ = false;
    m.dense_ = Eigen::MatrixXd::Zero(p, p);
    return m;
  }
  static BlockSym blockdiag(int n_sub, int sub_dim) {
    BlockSym m;
    m.blockdiag_ = true;
    m.blocks_.assign(n_sub, Eigen::MatrixXd::Zero(sub_dim, sub_dim));
    return m;
  }

  bool is_blockdiag() const { return blockdiag_; }
  int dim() const {
    return blockdiag_ ? static_cast<int>(blocks_.size()) * sub_dim() : static_cast<int>(dense_.rows());
  }
  int n_sub() const { return static_cast<int>(blocks_.size()); }
  int sub_dim() const { return blocks_.empty() ? 0 : static_cast<int>(blocks_[0].rows()); }

  Eigen::MatrixXd& dense_mat() { return dense_; }
  const Eigen::MatrixXd& dense_mat() const { return dense_; }
  Eigen::MatrixXd& block(int i) { return blocks_[i]; }
  const Eigen::MatrixXd& block(int i) const { return blocks_[i]; }

  void setZero();
  // this += w * x x' restricted to subject block i (blockdiag layout).
  void rank1(int i, const double* x, double w);
  // this += w * x x' (dense layout).
  void rank1(const double* x, int len, double w);
  void add_scaled(const BlockSym& other, double s);
  // Adds s * K to every subject block / to the dense matrix.
  void add_penalty_blocks(const Eigen::MatrixXd& K, double s);
  void add_diag(double s);
  void add_diag(const Eigen::VectorXd& d);

  double max_abs_diag() const;
  Eigen::MatrixXd to_dense() const;
  // this * x, reading only the accumulated lower triangle.
  Eigen::VectorXd mul(const Eigen::VectorXd& x) const;

  // Cholesky of -this (the negated Hessian); false if not positive definite.
  bool factorize_negated();
  // The remaining operations require factorize_negated() to have succeeded.
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  double logdet() const;  // of the negated matrix
  // mean + L^-T z with z standard normal, i.e. a N(mean, (-this)^-1) draw.
  Eigen::VectorXd sample(const Eigen::VectorXd& mean, Rng& rng) const;
  // Log density of N(x; mean, (-this)^-1), normalizing constant included.
  double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean) const;
  // tr((-this)^-1 * (-other)); other must share the layout.
  double trace_solve(const BlockSym& other) const;

 private:
  bool blockdiag_ = false;
  Eigen::MatrixXd dense_;
  std::vector<Eigen::MatrixXd> blocks_;
  Eigen::MatrixXd chol_;                // lower factor of -dense_
  std::vector<Eigen::MatrixXd> chols_;  // lower factors of -blocks_[i]
};

}  // namespace flexjm
