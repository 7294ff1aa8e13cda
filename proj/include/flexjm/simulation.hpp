#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "flexjm/data.hpp"
#include "flexjm/estimation.hpp"
#include "flexjm/model.hpp"
#include "flexjm/rng.hpp"
#include "flexjm/splines.hpp"

namespace flexjm {

// Generator configuration for the three experimental designs: setting 1 has
// a linear marker-hazard association, setting 2 a quadratic one, setting 3 a
// different quadratic per level of a binary group covariate.
struct SimConfig {
  int setting = 1;
  int n = 300;
  double keep_fraction = 0.1;     // fraction of grid measurements retained
  bool uniform_censoring = true;  // extra U(0, 1.5 t_max) censoring
  bool add_noise = true;
  double noise_sd = 0.3;
  double ri_var = 0.25;  // scalar random-intercept variance
  double t_max = 120.0;
  unsigned seed = 1;
};

// Latent truth of one generated data set. Every predictor evaluation is
// closed-form in these draws, so error metrics can be computed exactly.
struct SimTruth {
  int setting = 1;
  double noise_sd = 0.3;
  double t_max = 120.0;
  Eigen::VectorXd x1, x2;    // baseline covariates, U(-3, 3)
  Eigen::VectorXi group;     // binary group; all zero in settings 1-2
  Eigen::VectorXd r;         // scalar random intercepts
  BasisSpec fri_basis;       // cubic, 4 coefficients on [0, t_max]
  Eigen::MatrixXd fri_beta;  // n x 4 per-subject trajectory coefficients

  static double f_time(double t) {
    return 0.1 * (t + 2.0) * std::exp(-0.075 * t);
  }
  double eta_mu(int i, double t) const;
  double eta_lambda(double t) const {
    return 1.4 * std::log((t + 10.0) / 1000.0);
  }
  double eta_gamma(int i) const { return 0.3 * x1[i]; }
  double eta_sigma() const { return std::log(noise_sd); }
  double assoc(int i, double eta) const;
  double assoc_deriv(int i, double eta) const;
  double log_hazard(int i, double t) const;
  double hazard(int i, double t) const { return std::exp(log_hazard(i, t)); }
  double cumulative_hazard(int i, double t) const;
};

// Closed-form association curves per setting. The group argument is ignored
// outside setting 3.
double true_association(int setting, double eta, int group);
double true_association_deriv(int setting, double eta, int group);

// Event time solving the integrated hazard equation by bisection to the
// given time tolerance; returns t_max when the cumulative hazard at t_max
// cannot reach -log(u) (administrative censoring).
double invert_survival(const std::function<double(double)>& hazard, double u,
                       double t_max, double tol = 1e-8);

struct SimOutput {
  Dataset data;
  SimTruth truth;
  Eigen::VectorXd latent_event_time;  // before any censoring, capped at t_max
  int subjects_without_obs = 0;       // retained despite empty marker history
};

SimOutput simulate_dataset(const SimConfig& cfg);

// Fitting specification mirroring the generator's study models: baseline
// log-hazard spline with 9 constrained basis functions, per-subject
// functional random intercepts with 5 basis functions, smooth covariate
// effect, and the setting's association structure (5 constrained basis
// functions; per-group in setting 3).
JointModelSpec setting_fit_spec(int setting);

// Comparison points shared by the truth and fitted evaluations.
struct EvalDesign {
  Eigen::VectorXd t_grid;        // dense time grid 1..t_max
  Eigen::VectorXd t_coarse;      // decimated per-subject time grid
  Eigen::VectorXd eta_grid;      // 120 marker values spanning (-0.5, 2)
  Eigen::VectorXd eta_mu_event;  // true eta_mu_i(T_i), association argument
  int n_levels = 1;              // association curve count
};
EvalDesign make_eval_design(const SimOutput& sim);

// One parameter state's (or the truth's) predictor evaluations at the
// comparison points.
struct DrawEval {
  Eigen::VectorXd mu_obs, sigma_obs;  // longitudinal rows
  Eigen::MatrixXd mu_time;            // n x |t_coarse|
  Eigen::VectorXd gamma_event;        // n
  Eigen::VectorXd lambda_event;       // n, at T_i
  Eigen::VectorXd lambda_grid;        // |t_grid|
  Eigen::VectorXd alpha_event;        // n, at the true eta_mu_i(T_i)
  Eigen::MatrixXd alpha_grid;         // n_levels x |eta_grid|
  double avg_slope = 0.0;  // (1/n) sum of d(assoc)/d(eta) at subjects' events
};

DrawEval eval_truth(const SimOutput& sim, const EvalDesign& design);
DrawEval eval_state(const Model& m, const ThetaState& s,
                    const EvalDesign& design);
// Evaluates every stride-th kept draw of the chain.
std::vector<DrawEval> eval_chain(const Model& m, const FitResult& fit,
                                 const EvalDesign& design, int stride = 1);

struct PredMetrics {
  double mse = 0.0, bias = 0.0, coverage = 0.0;
};

// Error report against the truth: average mean-squared error, bias, and 95%
// interval coverage per predictor, per-point MSE curves, and the average
// association slope. The unidentified constant shared by the baseline
// log-hazard and the association is aligned by centering both curves (truth
// and every draw) over their evaluation grids, subtracting the reference
// curve's mean so group offsets survive in setting 3.
struct SimMetrics {
  PredMetrics mu_obs, sigma_obs, gamma_event, lambda_event, lambda_grid,
      alpha_event, alpha_grid;
  Eigen::VectorXd mse_mu_time;      // per t_coarse point
  Eigen::VectorXd mse_lambda_time;  // per t_grid point
  Eigen::VectorXd mse_alpha_grid;   // per eta_grid point, averaged over levels
  double avg_slope = 0.0;           // posterior mean of the per-draw slope
  double slope_q025 = 0.0, slope_q975 = 0.0;
};

SimMetrics metrics_from_draws(const DrawEval& truth,
                              const std::vector<DrawEval>& draws);

// Truth sidecar round-trip: per-subject latent draws plus the generator
// constants, sufficient to re-evaluate every true predictor. A nonempty
// stamp becomes a leading '#' provenance line, skipped on read.
void write_truth(const SimTruth& truth, const std::string& path,
                 const std::string& stamp = std::string());
SimTruth read_truth(const std::string& path);

}  // namespace flexjm
