#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "flexjm/estimation.hpp"
#include "flexjm/model.hpp"

namespace flexjm {

// Software version stamped into every artifact.
extern const char kVersion[];

// Current UTC time as e.g. 2026-08-19T12:34:56Z.
std::string iso8601_now();

// Writes content to path atomically: a sibling temp file is renamed into
// place, so failed runs never leave partial artifacts behind.
void write_text_atomic(const std::string& path, const std::string& content);

// Fit-run provenance. Status moves forward only:
// running -> converged | restarted-k-times | failed.
struct RunManifest {
  std::string config_hash;
  unsigned seed = 0;
  std::string version = kVersion;
  std::string started_at, finished_at;
  std::string status = "running";
};

void write_manifest(const RunManifest& man, const std::string& path);

// Posterior-mode artifact: per-block coefficient vectors and smoothing
// variances plus the attained log posterior.
void write_mode_json(const Model& m, const ThetaState& s, double logpost,
                     int restarts, const std::string& hash,
                     const std::string& path);

// Full kept chain in long form, one scalar per row:
//   iteration,block,index,value
// with coefficient blocks first, then variance slots, then the log posterior
// and log likelihood. iteration is the original chain iteration number. The
// leading '#' line stamps config hash, version and seed; identical seed and
// config reproduce the file byte for byte.
void write_chain_csv(const Model& m, const FitResult& fit,
                     const FitOptions& opt, const std::string& hash,
                     const std::string& path);

// Chain file reloaded against the model that produced it.
struct LoadedChain {
  std::string config_hash;
  std::vector<Eigen::MatrixXd> beta_draws;  // per block: kept x dim
  Eigen::MatrixXd tau2_draws;               // kept x n_var_slots
  Eigen::VectorXd logpost_draws, loglik_draws;
  int n_kept() const { return static_cast<int>(logpost_draws.size()); }
};
LoadedChain read_chain_csv(const Model& m, const std::string& path);

// The config_hash stamped in an artifact's leading '#' lines, empty when the
// file carries none. Cheap; reads only the head of the file.
std::string read_artifact_hash(const std::string& path);

// Posterior summary of every coefficient, variance and the average
// association slope, plus acceptance rates and DIC.
void write_summary_json(const Model& m, const FitResult& fit,
                        const FitOptions& opt, const std::string& hash,
                        const std::string& path);

// Machine-readable failure record for nonzero exits.
void write_error_json(const std::string& kind, const std::string& message,
                      const std::string& hash, const std::string& path);

// Average association slope (1/n) sum_i d eta_alpha/d eta_mu at the draw's
// own eta_mu(T_i), one value per kept draw.
Eigen::VectorXd alpha_slope_draws(const Model& m,
                                  const std::vector<Eigen::MatrixXd>& beta_draws);

// Pointwise posterior curve export, CSV rows grid,level,mean,q025,q975.
// alpha: association curve per factor level over an eta_mu grid.
// lambda: baseline log-hazard predictor over a time grid (level always 0).
void export_alpha_curve(const Model& m, const std::vector<Eigen::MatrixXd>& beta_draws,
                        const Eigen::VectorXd& grid, const std::string& hash,
                        const std::string& path);
void export_lambda_curve(const Model& m, const std::vector<Eigen::MatrixXd>& beta_draws,
                         const Eigen::VectorXd& grid, const std::string& hash,
                         const std::string& path);

}  // namespace flexjm
