#include "flexjm/blockmat.hpp"

#include <cmath>

#include "flexjm/errors.hpp"

namespace flexjm {

void BlockSym::setZero() {
  if (blockdiag_)
    for (auto& b : blocks_) b.setZero();
  else
    dense_.setZero();
}

void BlockSym::rank1(int i, const double* x, double w) {
  Eigen::MatrixXd& B = blocks_[i];
  const int d = static_cast<int>(B.rows());
  for (int a = 0; a < d; ++a) {
    const double wa = w * x[a];
    if (wa == 0.0) continue;
    for (int b = 0; b <= a; ++b) B(a, b) += wa * x[b];
  }
}

void BlockSym::rank1(const double* x, int len, double w) {
  for (int a = 0; a < len; ++a) {
    const double wa = w * x[a];
    if (wa == 0.0) continue;
    for (int b = 0; b <= a; ++b) dense_(a, b) += wa * x[b];
  }
}

void BlockSym::add_scaled(const BlockSym& other, double s) {
  if (blockdiag_) {
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i] += s * other.blocks_[i];
  } else {
    dense_ += s * other.dense_;
  }
}

void BlockSym::add_penalty_blocks(const Eigen::MatrixXd& K, double s) {
  if (blockdiag_)
    for (auto& b : blocks_) b += s * K;
  else
    dense_ += s * K;
}

void BlockSym::add_diag(double s) {
  if (blockdiag_)
    for (auto& b : blocks_) b.diagonal().array() += s;
  else
    dense_.diagonal().array() += s;
}

void BlockSym::add_diag(const Eigen::VectorXd& d) {
  if (blockdiag_) {
    const int bs = sub_dim();
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].diagonal() += d.segment(i * bs, bs);
  } else {
    dense_.diagonal() += d;
  }
}

double BlockSym::max_abs_diag() const {
  double m = 0.0;
  if (blockdiag_) {
    for (const auto& b : blocks_)
      m = std::max(m, b.diagonal().cwiseAbs().maxCoeff());
  } else {
    m = dense_.diagonal().cwiseAbs().maxCoeff();
  }
  return m;
}

Eigen::VectorXd BlockSym::mul(const Eigen::VectorXd& x) const {
  if (blockdiag_) {
    const int bs = sub_dim();
    Eigen::VectorXd y(dim());
    for (int i = 0; i < n_sub(); ++i)
      y.segment(i * bs, bs) =
          blocks_[i].selfadjointView<Eigen::Lower>() * x.segment(i * bs, bs);
    return y;
  }
  return dense_.selfadjointView<Eigen::Lower>() * x;
}

Eigen::MatrixXd BlockSym::to_dense() const {
  if (!blockdiag_) {
    // Only the lower triangle is accumulated; mirror it.
    Eigen::MatrixXd full = dense_.selfadjointView<Eigen::Lower>();
    return full;
  }
  const int bs = sub_dim();
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(dim(), dim());
  for (int i = 0; i < n_sub(); ++i)
    full.block(i * bs, i * bs, bs, bs) =
        Eigen::MatrixXd(blocks_[i].selfadjointView<Eigen::Lower>());
  return full;
}

bool BlockSym::factorize_negated() {
  if (blockdiag_) {
    chols_.resize(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      Eigen::MatrixXd A = -Eigen::MatrixXd(blocks_[i].selfadjointView<Eigen::Lower>());
      Eigen::LLT<Eigen::MatrixXd> llt(A);
      if (llt.info() != Eigen::Success) return false;
      chols_[i] = llt.matrixL();
    }
    return true;
  }
  Eigen::MatrixXd A = -Eigen::MatrixXd(dense_.selfadjointView<Eigen::Lower>());
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) return false;
  chol_ = llt.matrixL();
  return true;
}

Eigen::VectorXd BlockSym::solve(const Eigen::VectorXd& b) const {
  if (blockdiag_) {
    const int bs = sub_dim();
    Eigen::VectorXd x(b.size());
    for (int i = 0; i < n_sub(); ++i) {
      Eigen::VectorXd seg = b.segment(i * bs, bs);
      chols_[i].triangularView<Eigen::Lower>().solveInPlace(seg);
      chols_[i].triangularView<Eigen::Lower>().transpose().solveInPlace(seg);
      x.segment(i * bs, bs) = seg;
    }
    return x;
  }
  Eigen::VectorXd x = b;
  chol_.triangularView<Eigen::Lower>().solveInPlace(x);
  chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
  return x;
}

double BlockSym::logdet() const {
  double ld = 0.0;
  if (blockdiag_) {
    for (const auto& L : chols_)
      ld += 2.0 * L.diagonal().array().log().sum();
  } else {
    ld = 2.0 * chol_.diagonal().array().log().sum();
  }
  return ld;
}

Eigen::VectorXd BlockSym::sample(const Eigen::VectorXd& mean, Rng& rng) const {
  Eigen::VectorXd z(dim());
  for (int i = 0; i < dim(); ++i) z[i] = rng.normal();
  if (blockdiag_) {
    const int bs = sub_dim();
    Eigen::VectorXd x(dim());
    for (int i = 0; i < n_sub(); ++i) {
      Eigen::VectorXd seg = z.segment(i * bs, bs);
      chols_[i].triangularView<Eigen::Lower>().transpose().solveInPlace(seg);
      x.segment(i * bs, bs) = seg;
    }
    return mean + x;
  }
  chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(z);
  return mean + z;
}

double BlockSym::mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean) const {
  // N(x; mean, A^-1) with A = -this: 0.5 logdet A - d/2 log 2pi - 0.5 q,
  // q = (x - mean)' A (x - mean) = ||L'(x - mean)||^2.
  const Eigen::VectorXd d = x - mean;
  double q = 0.0;
  if (blockdiag_) {
    const int bs = sub_dim();
    for (int i = 0; i < n_sub(); ++i)
      q += (chols_[i].transpose() * d.segment(i * bs, bs)).squaredNorm();
  } else {
    q = (chol_.transpose() * d).squaredNorm();
  }
  return 0.5 * logdet() - 0.5 * dim() * std::log(2.0 * 3.14159265358979323846) -
         0.5 * q;
}

double BlockSym::trace_solve(const BlockSym& other) const {
  double tr = 0.0;
  if (blockdiag_) {
    for (int i = 0; i < n_sub(); ++i) {
      const Eigen::MatrixXd B =
          -Eigen::MatrixXd(other.blocks_[i].selfadjointView<Eigen::Lower>());
      Eigen::MatrixXd S = chols_[i].triangularView<Eigen::Lower>().solve(B);
      S = chols_[i].triangularView<Eigen::Lower>().transpose().solve(S);
      tr += S.trace();
    }
    return tr;
  }
  const Eigen::MatrixXd B =
      -Eigen::MatrixXd(other.dense_.selfadjointView<Eigen::Lower>());
  Eigen::MatrixXd S = chol_.triangularView<Eigen::Lower>().solve(B);
  S = chol_.triangularView<Eigen::Lower>().transpose().solve(S);
  return S.trace();
}

}  // namespace flexjm
