#pragma once

#include <functional>
#include <vector>

#include "flexjm/likelihood.hpp"
#include "flexjm/model.hpp"
#include "flexjm/rng.hpp"

namespace flexjm {

struct FitOptions {
  int mcmc_iters = 13000;
  int burnin = 3000;
  int thin = 2;
  unsigned seed = 1;
  int max_restarts = 3;   // mode-finding restarts after non-concave blocks
  int max_backfit = 200;  // outer sweeps of the mode finder
  double mode_tol = 1e-6;
  int var_grid = 31;  // AICc grid resolution per smoothing variance
  double var_log10_lo = -4.0;
  double var_log10_hi = 4.0;
  bool mode_only = false;  // stop after the posterior mode, skip sampling

  int n_kept() const {
    int k = 0;
    for (int it = burnin + 1; it <= mcmc_iters; ++it)
      if ((it - burnin) % thin == 0) ++k;
    return k;
  }
};

// One damped Newton step maximizing the log posterior over block b. The step
// length is picked from nu in {0.1, ..., 1.0} by the resulting log
// posterior; the step is skipped entirely when no candidate improves it.
// Returns the log posterior after the update. Throws NonConcaveBlock when
// the penalized Hessian cannot be made negative definite by ridging.
double newton_update(const Model& m, ThetaState& s, int b, double logpost_now);

// Smoothing-variance selection for block b by corrected AIC: each candidate
// variance on the log-spaced grid is scored after a single full Newton step
// under the candidate penalty, and the best candidate's variance and stepped
// coefficients are kept. Two-variance blocks are optimized coordinate-wise.
// No-op for blocks without a smoothing variance.
void optimize_variance(const Model& m, ThetaState& s, int b,
                       const FitOptions& opt);

// Effective degrees of freedom tr[(-H_pen)^-1 (-H_unpen)] of block b at the
// given variances.
double block_edf(const Model& m, const ThetaState& s, int b,
                 const std::vector<double>& tau2);

// Backfitting posterior mode: sweeps Newton updates over all blocks in
// update order followed by a variance-selection pass, until the log
// posterior stabilizes. Returns the final log posterior.
double posterior_mode(const Model& m, ThetaState& s, const FitOptions& opt);

// One Metropolis-Hastings update of block b using the Taylor proposal
// N(beta + (-H)^-1 s, (-H)^-1) with the asymmetry correction evaluated at
// both ends. Returns the acceptance log ratio; accepted draws mutate s and
// set *accepted when given.
double mh_block_update(const Model& m, ThetaState& s, int b, Rng& rng,
                       bool* accepted = nullptr);

// Conjugate inverse gamma draw of the single smoothing variance of block b.
void gibbs_variance(const Model& m, ThetaState& s, int b, Rng& rng);

// Slice-sampling update of both smoothing variances of a two-variance
// block, each on the log scale with stepping out.
void slice_variance(const Model& m, ThetaState& s, int b, Rng& rng);

// Generic univariate slice sampler: stepping out with a randomized split of
// the max_expand total expansion budget (Neal 2003), then shrinkage. The
// capped interval keeps the transition exact for arbitrarily heavy-tailed
// targets. Throws NumericalError if the start point lies outside the support.
struct SliceResult {
  double x;
  double log_level;
};
SliceResult slice_sample_1d(const std::function<double(double)>& logf,
                            double x0, double width, int max_expand, Rng& rng);

struct FitResult {
  ThetaState mode;
  double mode_logpost = 0.0;
  ThetaState mean;  // posterior means, caches refreshed
  std::vector<Eigen::MatrixXd> beta_draws;  // per block: kept x dim
  Eigen::MatrixXd tau2_draws;               // kept x n_var_slots
  Eigen::VectorXd logpost_draws;
  Eigen::VectorXd loglik_draws;
  std::vector<double> accept_rate;  // per block
  double dic = 0.0, pd = 0.0;
  int restarts_used = 0;
};

// Deviance information criterion with the plug-in estimate at the posterior
// means: Dbar + pD, pD = Dbar - D(theta_bar).
void compute_dic(const Model& m, FitResult& fit);

// Full pipeline: initialized state, posterior mode, MCMC, posterior means,
// DIC. Restarts from a jittered state when a block goes non-concave.
FitResult run_mcmc(const Model& m, const FitOptions& opt);

struct ChainStats {
  double mean = 0.0, sd = 0.0, q025 = 0.0, q975 = 0.0;
};
ChainStats summarize(const Eigen::VectorXd& draws);

}  // namespace flexjm
