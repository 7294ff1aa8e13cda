#pragma once

#include <Eigen/Dense>

#include "flexjm/blockmat.hpp"
#include "flexjm/model.hpp"

namespace flexjm {

// Gaussian longitudinal log likelihood, constants included:
// -N/2 log 2pi - sum eta_sigma - 1/2 sum (y - eta_mu)^2 exp(-2 eta_sigma).
double loglik_long(const Model& m, const ThetaState& s);

// Survival log likelihood: delta' (eta_lambda + eta_gamma + eta_alpha)
// evaluated at the follow-up times minus the summed cumulative hazards.
double loglik_surv(const Model& m, const ThetaState& s);

// One subject's cumulative hazard from externally supplied quadrature
// weights and integrand values exp(eta_lambda + eta_alpha) at the nodes.
double cumulative_hazard(const Eigen::VectorXd& w, const Eigen::VectorXd& psi,
                         double exp_eta_gamma);

// Log of the Gaussian smoothing prior of block b at the current variances:
// the quadratic form plus the variance-dependent part of the log
// pseudo-determinant. Terms free of beta and tau^2 are dropped.
double log_smooth_prior(const Model& m, const ThetaState& s, int b);

// Inverse gamma log density, all constants included.
double ig_logpdf(double x, double a, double b);

// Smoothing priors plus variance hyperpriors over all blocks.
double log_prior(const Model& m, const ThetaState& s);

// loglik_long + loglik_surv + log_prior. Returns -infinity when a cached
// exponent overflowed; samplers treat such states as rejectable, the mode
// finder as a failed step.
double log_posterior(const Model& m, const ThetaState& s);

// Prior precision of block b at the given variances, vague parts included.
// Layout matches the block: dense, or one sub-block per subject.
BlockSym prior_precision(const Model& m, const std::vector<double>& tau2, int b);

// beta' K beta for variance component comp (1 or 2) of block b, using the
// expanded penalty for dense blocks and the per-subject sum otherwise.
double penalty_quadform(const Model& m, const ThetaState& s, int b, int comp);

struct BlockDerivs {
  Eigen::VectorXd score;
  BlockSym hess;
};

// Score and Hessian of the log posterior (penalized = true) or of the log
// likelihood alone with respect to beta[b], all other blocks held fixed.
// State caches must be current.
BlockDerivs score_hessian(const Model& m, const ThetaState& s, int b,
                          bool penalized = true);

}  // namespace flexjm
