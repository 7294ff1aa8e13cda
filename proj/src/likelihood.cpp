#include "flexjm/likelihood.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "flexjm/errors.hpp"

namespace flexjm {

namespace {

constexpr double log_2pi = 1.8378770664093454836;

// Association design row at context c, row r, from the cached g1 values.
void alpha_row(const Model& m, const ThetaState& s, Ctx c, int r, double* out) {
  const AssocDesign& a = m.assoc();
  const Eigen::MatrixXd& g1 = (c == ctx_evt) ? s.g1_evt : s.g1_quad;
  const Eigen::MatrixXd& G2 = a.G2[c];
  int k = 0;
  for (int j1 = 0; j1 < a.p1; ++j1)
    for (int j2 = 0; j2 < a.p2; ++j2) out[k++] = g1(r, j1) * G2(r, j2);
  for (int j = 0; j < a.n_intercepts; ++j) out[k + j] = 0.0;
  if (a.n_intercepts > 0) {
    const int i = (c == ctx_evt) ? r : r / m.nq();
    if (a.level[i] > 0) out[k + a.level[i] - 1] = 1.0;
  }
}

// score += X' sw and hess += sum_r hw_r x_r x_r' for a stored design.
void contract_dense(const Eigen::MatrixXd& X, const Eigen::VectorXd& sw,
                    const Eigen::VectorXd& hw, Eigen::VectorXd& score,
                    BlockSym& hess) {
  if (X.rows() == 0) return;
  score.noalias() += X.transpose() * sw;
  if (hw.size() > 0)
    hess.dense_mat().noalias() += X.transpose() * hw.asDiagonal() * X;
}

// Same contraction for a subject-structured block with compact rows.
void contract_subject(const Model& m, const CoefBlock& blk, Ctx c,
                      const Eigen::VectorXd& sw, const Eigen::VectorXd& hw,
                      Eigen::VectorXd& score, BlockSym& hess) {
  const Eigen::MatrixXd& C = blk.C[c];
  const int sd = blk.sub_dim, nq = m.nq();
  const Eigen::VectorXi& subj = m.data().subj;
  Eigen::RowVectorXd row(sd);  // contiguous copy; matrix rows are strided
  for (int r = 0; r < C.rows(); ++r) {
    const int i = (c == ctx_long) ? subj[r] : (c == ctx_evt ? r : r / nq);
    if (sw[r] != 0.0)
      score.segment(i * sd, sd) += sw[r] * C.row(r).transpose();
    if (hw.size() > 0 && hw[r] != 0.0) {
      row = C.row(r);
      hess.rank1(i, row.data(), hw[r]);
    }
  }
}

}  // namespace

double loglik_long(const Model& m, const ThetaState& s) {
  const int N = m.N();
  if (N == 0) return 0.0;
  const Eigen::ArrayXd res = (m.data().y - s.eta_mu_long).array();
  return -0.5 * N * log_2pi - s.eta_sig_long.sum() -
         0.5 * (res.square() * s.invR.array()).sum();
}

double loglik_surv(const Model& m, const ThetaState& s) {
  const Eigen::ArrayXd& ev = m.data().event.array();
  return (ev * (s.eta_lam_evt + s.eta_gam + s.eta_alpha_evt).array()).sum() -
         s.cumhaz.sum();
}

double cumulative_hazard(const Eigen::VectorXd& w, const Eigen::VectorXd& psi,
                         double exp_eta_gamma) {
  return exp_eta_gamma * w.dot(psi);
}

double ig_logpdf(double x, double a, double b) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(x) - b / x;
}

double penalty_quadform(const Model& m, const ThetaState& s, int b, int comp) {
  const CoefBlock& blk = m.block(b);
  const Eigen::VectorXd& beta = s.beta[b];
  const Eigen::MatrixXd& Kc = (comp == 1) ? blk.K1 : blk.K2;
  if (!blk.subject_structured) {
    const Eigen::MatrixXd& Ke = (comp == 1) ? blk.K1e : blk.K2e;
    return beta.dot(Ke * beta);
  }
  double q = 0.0;
  const int sd = blk.sub_dim;
  for (int i = 0; i < blk.n_sub; ++i) {
    const auto seg = beta.segment(i * sd, sd);
    q += seg.dot(Kc * seg);
  }
  return q;
}

double log_smooth_prior(const Model& m, const ThetaState& s, int b) {
  const CoefBlock& blk = m.block(b);
  const Eigen::VectorXd& beta = s.beta[b];
  double lp = 0.0;
  if (blk.fixed_prec > 0.0) lp -= 0.5 * blk.fixed_prec * beta.squaredNorm();
  if (blk.extra_fixed_prec.size() > 0)
    lp -= 0.5 * beta.dot(blk.extra_fixed_prec.asDiagonal() * beta);
  if (blk.n_var == 0) return lp;

  const double t1 = s.tau2[blk.slot1];
  lp -= 0.5 * penalty_quadform(m, s, b, 1) / t1;
  if (blk.n_var == 1) {
    lp -= 0.5 * blk.rank1 * std::log(t1);
    return lp;
  }
  const double t2 = s.tau2[blk.slot2];
  lp -= 0.5 * penalty_quadform(m, s, b, 2) / t2;
  // Log pseudo-determinant of the combined precision: its eigenvalues are
  // all pairs eigA_i/tau1^2 + eigB_j/tau2^2, each repeated pdet_mult times.
  double maxv = 0.0;
  for (Eigen::Index i = 0; i < blk.eigA.size(); ++i)
    for (Eigen::Index j = 0; j < blk.eigB.size(); ++j)
      maxv = std::max(maxv, blk.eigA[i] / t1 + blk.eigB[j] / t2);
  const double cutoff = 1e-10 * maxv;
  double logpdet = 0.0;
  for (Eigen::Index i = 0; i < blk.eigA.size(); ++i)
    for (Eigen::Index j = 0; j < blk.eigB.size(); ++j) {
      const double v = blk.eigA[i] / t1 + blk.eigB[j] / t2;
      if (v > cutoff) logpdet += std::log(v);
    }
  lp += 0.5 * blk.pdet_mult * logpdet;
  return lp;
}

double log_prior(const Model& m, const ThetaState& s) {
  double lp = 0.0;
  for (int b = 0; b < m.n_blocks(); ++b) {
    const CoefBlock& blk = m.block(b);
    lp += log_smooth_prior(m, s, b);
    if (blk.n_var >= 1) lp += ig_logpdf(s.tau2[blk.slot1], blk.ha1, blk.hb1);
    if (blk.n_var == 2) lp += ig_logpdf(s.tau2[blk.slot2], blk.ha2, blk.hb2);
  }
  return lp;
}

double log_posterior(const Model& m, const ThetaState& s) {
  if (s.overflow) return -std::numeric_limits<double>::infinity();
  return loglik_long(m, s) + loglik_surv(m, s) + log_prior(m, s);
}

BlockSym prior_precision(const Model& m, const std::vector<double>& tau2, int b) {
  const CoefBlock& blk = m.block(b);
  if (!blk.subject_structured) {
    BlockSym P = BlockSym::dense(blk.dim);
    if (blk.fixed_prec > 0.0) P.add_diag(blk.fixed_prec);
    if (blk.extra_fixed_prec.size() > 0) P.add_diag(blk.extra_fixed_prec);
    if (blk.n_var >= 1) P.dense_mat() += blk.K1e / tau2[blk.slot1];
    if (blk.n_var == 2) P.dense_mat() += blk.K2e / tau2[blk.slot2];
    return P;
  }
  BlockSym P = BlockSym::blockdiag(blk.n_sub, blk.sub_dim);
  if (blk.fixed_prec > 0.0) P.add_diag(blk.fixed_prec);
  if (blk.n_var >= 1) P.add_penalty_blocks(blk.K1, 1.0 / tau2[blk.slot1]);
  if (blk.n_var == 2) P.add_penalty_blocks(blk.K2, 1.0 / tau2[blk.slot2]);
  return P;
}

BlockDerivs score_hessian(const Model& m, const ThetaState& s, int b,
                          bool penalized) {
  const CoefBlock& blk = m.block(b);
  const int n = m.n(), nq = m.nq(), nqr = n * nq;
  const Eigen::VectorXd& ev = m.data().event;

  BlockDerivs d;
  d.score = Eigen::VectorXd::Zero(blk.dim);
  d.hess = blk.subject_structured ? BlockSym::blockdiag(blk.n_sub, blk.sub_dim)
                                  : BlockSym::dense(blk.dim);

  // Negative quadrature weights of the cumulative hazard:
  // qw_r = -exp(eta_gamma_i) W_r psi_r; the score weight of any predictor
  // entering psi log-linearly, and its own Hessian weight.
  auto make_qw = [&]() {
    Eigen::VectorXd qw(nqr);
    for (int i = 0; i < n; ++i) {
      const double eg = std::exp(s.eta_gam[i]);
      for (int q = 0; q < nq; ++q) {
        const int r = i * nq + q;
        qw[r] = -eg * m.quad_w()[r] * s.psi_quad[r];
      }
    }
    return qw;
  };
  const Eigen::VectorXd none;

  switch (blk.pred) {
    case PredictorId::lambda: {
      const Eigen::VectorXd qw = make_qw();
      contract_dense(blk.X[ctx_evt], ev, none, d.score, d.hess);
      contract_dense(blk.X[ctx_quad], qw, qw, d.score, d.hess);
      break;
    }
    case PredictorId::gamma: {
      // exp(eta_gamma) factors out of the integral, so the event rows carry
      // both the event indicator and the full cumulative hazard.
      const Eigen::VectorXd sw = ev - s.cumhaz;
      const Eigen::VectorXd hw = -s.cumhaz;
      contract_dense(blk.X[ctx_evt], sw, hw, d.score, d.hess);
      break;
    }
    case PredictorId::alpha: {
      const Eigen::VectorXd qw = make_qw();
      std::vector<double> row(blk.dim);
      for (int i = 0; i < n; ++i) {
        if (ev[i] == 0.0) continue;
        alpha_row(m, s, ctx_evt, i, row.data());
        for (int k = 0; k < blk.dim; ++k) d.score[k] += row[k];
      }
      for (int r = 0; r < nqr; ++r) {
        alpha_row(m, s, ctx_quad, r, row.data());
        for (int k = 0; k < blk.dim; ++k) d.score[k] += qw[r] * row[k];
        d.hess.rank1(row.data(), blk.dim, qw[r]);
      }
      break;
    }
    case PredictorId::mu: {
      // Longitudinal rows.
      if (m.N() > 0) {
        const Eigen::VectorXd res = m.data().y - s.eta_mu_long;
        const Eigen::VectorXd swl = res.cwiseProduct(s.invR);
        const Eigen::VectorXd hwl = -s.invR;
        if (blk.subject_structured)
          contract_subject(m, blk, ctx_long, swl, hwl, d.score, d.hess);
        else
          contract_dense(blk.X[ctx_long], swl, hwl, d.score, d.hess);
      }
      // Event rows through the association chain: d eta_alpha / d eta_mu = w,
      // second derivative v.
      const Eigen::VectorXd swe = ev.cwiseProduct(s.w_evt);
      const Eigen::VectorXd hwe = ev.cwiseProduct(s.v_evt);
      // Quadrature rows: psi depends on eta_mu through eta_alpha.
      const Eigen::VectorXd qw = make_qw();
      const Eigen::VectorXd swq = qw.cwiseProduct(s.w_quad);
      const Eigen::VectorXd hwq =
          qw.cwiseProduct(s.w_quad.cwiseProduct(s.w_quad) + s.v_quad);
      if (blk.subject_structured) {
        contract_subject(m, blk, ctx_evt, swe, hwe, d.score, d.hess);
        contract_subject(m, blk, ctx_quad, swq, hwq, d.score, d.hess);
      } else {
        contract_dense(blk.X[ctx_evt], swe, hwe, d.score, d.hess);
        contract_dense(blk.X[ctx_quad], swq, hwq, d.score, d.hess);
      }
      break;
    }
    case PredictorId::sigma: {
      const Eigen::VectorXd res = m.data().y - s.eta_mu_long;
      const Eigen::VectorXd r2p = res.cwiseProduct(res).cwiseProduct(s.invR);
      const Eigen::VectorXd sw = r2p - Eigen::VectorXd::Ones(m.N());
      const Eigen::VectorXd hw = -2.0 * r2p;
      contract_dense(blk.X[ctx_long], sw, hw, d.score, d.hess);
      break;
    }
  }

  if (penalized) {
    const BlockSym P = prior_precision(m, s.tau2, b);
    d.score -= P.mul(s.beta[b]);
    d.hess.add_scaled(P, -1.0);
  }
  return d;
}

}  // namespace flexjm
