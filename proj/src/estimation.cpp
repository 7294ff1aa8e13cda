#include "flexjm/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flexjm/errors.hpp"
#include "flexjm/stats.hpp"

namespace flexjm {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

// Factorize -H, escalating a diagonal ridge by doubling when the matrix is
// not negative definite. The budget of 32 doublings (up to ~4e3 max|diag|)
// also dominates genuinely convex directions, e.g. a random intercept of a
// subject without longitudinal rows whose only curvature is the survival
// term; the Newton line search and the MH asymmetry correction keep heavily
// ridged steps safe, so failure here means non-finite curvature.
bool factorize_ridged(BlockSym& H) {
  if (H.factorize_negated()) return true;
  double add = 1e-6 * std::max(H.max_abs_diag(), 1.0);
  double total = 0.0;
  for (int k = 0; k < 32; ++k) {
    H.add_diag(-add);
    total += add;
    if (H.factorize_negated()) return true;
    add = total;  // doubles the accumulated ridge
  }
  return false;
}

double loglik(const Model& m, const ThetaState& s) {
  if (s.overflow) return neg_inf;
  return loglik_long(m, s) + loglik_surv(m, s);
}

}  // namespace

double newton_update(const Model& m, ThetaState& s, int b, double logpost_now) {
  BlockDerivs d = score_hessian(m, s, b, true);
  if (!factorize_ridged(d.hess)) throw NonConcaveBlock(m.block(b).name, "curvature not negative definite after ridging");
  const Eigen::VectorXd dir = d.hess.solve(d.score);

  const StateCheckpoint cp = m.checkpoint(s, b);
  double best_lp = logpost_now;
  double best_nu = 0.0;
  for (int k = 10; k >= 1; --k) {
    const double nu = 0.1 * k;
    s.beta[b] = cp.beta + nu * dir;
    m.refresh_after_block(s, b);
    const double lp = log_posterior(m, s);
    if (lp > best_lp) {
      best_lp = lp;
      best_nu = nu;
    }
  }
  if (best_nu == 0.0) {
    m.restore(s, cp);
    return logpost_now;
  }
  s.beta[b] = cp.beta + best_nu * dir;
  m.refresh_after_block(s, b);
  return best_lp;
}

double block_edf(const Model& m, const ThetaState& s, int b,
                 const std::vector<double>& tau2) {
  BlockDerivs d = score_hessian(m, s, b, false);
  BlockSym Hp = d.hess;
  const BlockSym P = prior_precision(m, tau2, b);
  Hp.add_scaled(P, -1.0);
  if (!Hp.factorize_negated()) return std::numeric_limits<double>::quiet_NaN();
  return Hp.trace_solve(d.hess);
}

void optimize_variance(const Model& m, ThetaState& s, int b,
                       const FitOptions& opt) {
  const CoefBlock& blk = m.block(b);
  if (blk.n_var == 0) return;
  const double n_eff =
      (blk.pred == PredictorId::mu || blk.pred == PredictorId::sigma)
          ? static_cast<double>(m.N())
          : static_cast<double>(m.n());

  for (int comp = 1; comp <= blk.n_var; ++comp) {
    const int slot = (comp == 1) ? blk.slot1 : blk.slot2;
    // Unpenalized derivatives at the current coefficients; shared by every
    // candidate of this coordinate.
    const BlockDerivs d0 = score_hessian(m, s, b, false);

    double best_aicc = std::numeric_limits<double>::infinity();
    double best_tau = s.tau2[slot];
    Eigen::VectorXd best_beta = s.beta[b];
    bool found = false;

    for (int g = 0; g < opt.var_grid; ++g) {
      const double l10 = opt.var_log10_lo +
                         (opt.var_log10_hi - opt.var_log10_lo) * g /
                             std::max(1, opt.var_grid - 1);
      std::vector<double> cand = s.tau2;
      cand[slot] = std::pow(10.0, l10);

      const BlockSym P = prior_precision(m, cand, b);
      BlockSym Hp = d0.hess;
      Hp.add_scaled(P, -1.0);
      if (!Hp.factorize_negated()) continue;
      const Eigen::VectorXd spen = d0.score - P.mul(s.beta[b]);
      const Eigen::VectorXd beta_c = s.beta[b] + Hp.solve(spen);
      const double edf = Hp.trace_solve(d0.hess);
      if (!(n_eff - edf - 1.0 > 0.0)) continue;

      const StateCheckpoint cp = m.checkpoint(s, b);
      s.beta[b] = beta_c;
      m.refresh_after_block(s, b);
      const double ll = loglik(m, s);
      m.restore(s, cp);
      if (!std::isfinite(ll)) continue;

      const double aicc =
          -2.0 * ll + 2.0 * edf + 2.0 * edf * (edf + 1.0) / (n_eff - edf - 1.0);
      if (aicc < best_aicc) {
        best_aicc = aicc;
        best_tau = cand[slot];
        best_beta = beta_c;
        found = true;
      }
    }
    if (!found) throw NonConcaveBlock(blk.name, "no usable variance candidate on the grid");
    s.tau2[slot] = best_tau;
    s.beta[b] = best_beta;
    m.refresh_after_block(s, b);
  }
}

double posterior_mode(const Model& m, ThetaState& s, const FitOptions& opt) {
  double lp = log_posterior(m, s);
  if (!std::isfinite(lp)) throw NonConcaveBlock("init", "log posterior not finite at initial state");
  for (int sweep = 0; sweep < opt.max_backfit; ++sweep) {
    const double lp_before = lp;
    for (int b = 0; b < m.n_blocks(); ++b) lp = newton_update(m, s, b, lp);
    for (int b = 0; b < m.n_blocks(); ++b)
      if (m.block(b).n_var > 0) optimize_variance(m, s, b, opt);
    lp = log_posterior(m, s);
    if (std::abs(lp - lp_before) < opt.mode_tol * (std::abs(lp_before) + 1.0))
      break;
  }
  return lp;
}

double mh_block_update(const Model& m, ThetaState& s, int b, Rng& rng,
                       bool* accepted) {
  if (accepted) *accepted = false;
  const StateCheckpoint cp = m.checkpoint(s, b);
  const double lp0 = log_posterior(m, s);

  BlockDerivs d = score_hessian(m, s, b, true);
  if (!factorize_ridged(d.hess)) throw NonConcaveBlock(m.block(b).name, "proposal curvature not negative definite");
  const Eigen::VectorXd mean_fwd = s.beta[b] + d.hess.solve(d.score);
  const Eigen::VectorXd prop = d.hess.sample(mean_fwd, rng);
  const double lq_fwd = d.hess.mvn_logpdf(prop, mean_fwd);

  s.beta[b] = prop;
  m.refresh_after_block(s, b);
  const double lp1 = log_posterior(m, s);

  double log_ratio = neg_inf;
  if (std::isfinite(lp1)) {
    // Reverse proposal density at the candidate's own Taylor expansion. A
    // candidate whose Hessian cannot be ridged into shape is rejected.
    BlockDerivs d2 = score_hessian(m, s, b, true);
    if (factorize_ridged(d2.hess)) {
      const Eigen::VectorXd mean_rev = s.beta[b] + d2.hess.solve(d2.score);
      const double lq_rev = d2.hess.mvn_logpdf(cp.beta, mean_rev);
      log_ratio = (lp1 - lp0) + (lq_rev - lq_fwd);
    }
  }
  if (std::log(rng.uniform01()) < log_ratio) {
    if (accepted) *accepted = true;
    return log_ratio;
  }
  m.restore(s, cp);
  return log_ratio;
}

void gibbs_variance(const Model& m, ThetaState& s, int b, Rng& rng) {
  const CoefBlock& blk = m.block(b);
  if (blk.n_var != 1)
    throw NumericalError("conjugate variance draw needs exactly one variance");
  const double q = penalty_quadform(m, s, b, 1);
  s.tau2[blk.slot1] =
      rng.inv_gamma(blk.ha1 + 0.5 * blk.rank1, blk.hb1 + 0.5 * q);
}

SliceResult slice_sample_1d(const std::function<double(double)>& logf,
                            double x0, double width, int max_expand, Rng& rng) {
  const double f0 = logf(x0);
  if (!std::isfinite(f0))
    throw NumericalError("slice sampler started outside the support");
  const double level = f0 + std::log(rng.uniform01());
  double L = x0 - width * rng.uniform01();
  double R = L + width;
  // Stepping out with a randomized split of a fixed total budget (Neal 2003,
  // Fig. 3). Capping the interval this way keeps the transition exact for any
  // budget, so nearly flat conditionals (a variance with almost no likelihood
  // information under a diffuse hyperprior) mix inside a finite window
  // instead of failing to bound the slice.
  int j = static_cast<int>(std::floor(max_expand * rng.uniform01()));
  int k = max_expand - 1 - j;
  while (j-- > 0 && logf(L) > level) L -= width;
  while (k-- > 0 && logf(R) > level) R += width;
  for (;;) {
    const double x1 = L + rng.uniform01() * (R - L);
    if (logf(x1) > level) return {x1, level};
    if (x1 < x0)
      L = x1;
    else
      R = x1;
  }
}

void slice_variance(const Model& m, ThetaState& s, int b, Rng& rng) {
  const CoefBlock& blk = m.block(b);
  if (blk.n_var != 2)
    throw NumericalError("slice variance update expects two variances");
  for (int comp = 1; comp <= 2; ++comp) {
    const int slot = (comp == 1) ? blk.slot1 : blk.slot2;
    const double ha = (comp == 1) ? blk.ha1 : blk.ha2;
    const double hb = (comp == 1) ? blk.hb1 : blk.hb2;
    const double save = s.tau2[slot];
    auto logf = [&](double z) {
      s.tau2[slot] = std::exp(z);
      const double v =
          log_smooth_prior(m, s, b) + ig_logpdf(s.tau2[slot], ha, hb) + z;
      s.tau2[slot] = save;
      return v;
    };
    const SliceResult r =
        slice_sample_1d(logf, std::log(save), 1.0, 100, rng);
    s.tau2[slot] = std::exp(r.x);
  }
}

namespace {

ThetaState init_state(const Model& m, const FitOptions& opt, int attempt) {
  ThetaState s = m.make_state();
  const Dataset& d = m.data();
  for (int b = 0; b < m.n_blocks(); ++b) {
    const CoefBlock& blk = m.block(b);
    if (blk.kind != TermKind::intercept || blk.is_alpha) continue;
    if (blk.pred == PredictorId::mu && m.N() > 0) {
      s.beta[b][0] = d.y.mean();
    } else if (blk.pred == PredictorId::sigma && m.N() > 1) {
      const double sd =
          std::sqrt((d.y.array() - d.y.mean()).square().sum() / (m.N() - 1));
      s.beta[b][0] = (sd > 0.0) ? std::log(sd) : 0.0;
    } else if (blk.pred == PredictorId::lambda) {
      s.beta[b][0] =
          std::log(std::max(d.event.sum(), 0.5) / d.time.sum());
    }
  }
  if (attempt > 0) {
    Rng jit = Rng::derive(opt.seed, 9000 + attempt);
    for (auto& beta : s.beta)
      for (Eigen::Index j = 0; j < beta.size(); ++j)
        beta[j] += 0.1 * jit.normal();
  }
  m.refresh_all(s);
  return s;
}

void sample_chain(const Model& m, ThetaState& s, const FitOptions& opt,
                  FitResult& fit) {
  Rng rng = Rng::derive(opt.seed, 1);
  const int kept = opt.n_kept();
  fit.beta_draws.resize(m.n_blocks());
  for (int b = 0; b < m.n_blocks(); ++b)
    fit.beta_draws[b].resize(kept, m.block(b).dim);
  fit.tau2_draws.resize(kept, m.n_var_slots());
  fit.logpost_draws.resize(kept);
  fit.loglik_draws.resize(kept);
  std::vector<long> acc(m.n_blocks(), 0);

  int kidx = 0;
  for (int it = 1; it <= opt.mcmc_iters; ++it) {
    for (int b = 0; b < m.n_blocks(); ++b) {
      bool a = false;
      mh_block_update(m, s, b, rng, &a);
      acc[b] += a ? 1 : 0;
    }
    for (int b = 0; b < m.n_blocks(); ++b) {
      if (m.block(b).n_var == 1)
        gibbs_variance(m, s, b, rng);
      else if (m.block(b).n_var == 2)
        slice_variance(m, s, b, rng);
    }
    if (it > opt.burnin && (it - opt.burnin) % opt.thin == 0) {
      for (int b = 0; b < m.n_blocks(); ++b)
        fit.beta_draws[b].row(kidx) = s.beta[b];
      for (int v = 0; v < m.n_var_slots(); ++v)
        fit.tau2_draws(kidx, v) = s.tau2[v];
      fit.logpost_draws[kidx] = log_posterior(m, s);
      fit.loglik_draws[kidx] = loglik(m, s);
      ++kidx;
    }
  }
  fit.accept_rate.assign(m.n_blocks(), 0.0);
  for (int b = 0; b < m.n_blocks(); ++b)
    fit.accept_rate[b] = static_cast<double>(acc[b]) / opt.mcmc_iters;
}

void compute_means(const Model& m, FitResult& fit) {
  fit.mean = fit.mode;
  for (int b = 0; b < m.n_blocks(); ++b)
    fit.mean.beta[b] = fit.beta_draws[b].colwise().mean();
  for (int v = 0; v < m.n_var_slots(); ++v)
    fit.mean.tau2[v] = fit.tau2_draws.col(v).mean();
  m.refresh_all(fit.mean);
}

}  // namespace

void compute_dic(const Model& m, FitResult& fit) {
  const double dbar = -2.0 * fit.loglik_draws.mean();
  const double dhat = -2.0 * loglik(m, fit.mean);
  fit.pd = dbar - dhat;
  fit.dic = dbar + fit.pd;
}

FitResult run_mcmc(const Model& m, const FitOptions& opt) {
  for (int attempt = 0; attempt <= opt.max_restarts; ++attempt) {
    try {
      ThetaState s = init_state(m, opt, attempt);
      FitResult fit;
      fit.restarts_used = attempt;
      fit.mode_logpost = posterior_mode(m, s, opt);
      fit.mode = s;
      if (opt.mode_only) {
        fit.mean = s;
        return fit;
      }
      sample_chain(m, s, opt, fit);
      compute_means(m, fit);
      compute_dic(m, fit);
      return fit;
    } catch (const NonConcaveBlock& e) {
      if (attempt == opt.max_restarts)
        throw FitFailure(std::string("posterior surface stayed non-concave "
                                     "after restarts: ") +
                         e.what());
    }
  }
  throw FitFailure("unreachable");
}

ChainStats summarize(const Eigen::VectorXd& draws) {
  ChainStats st;
  const int n = static_cast<int>(draws.size());
  if (n == 0) return st;
  st.mean = draws.mean();
  if (n > 1)
    st.sd = std::sqrt((draws.array() - st.mean).square().sum() / (n - 1));
  Eigen::VectorXd sorted = draws;
  std::sort(sorted.data(), sorted.data() + n);
  st.q025 = quantile_type7(sorted, 0.025);
  st.q975 = quantile_type7(sorted, 0.975);
  return st;
}

}  // namespace flexjm
