#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "flexjm/data.hpp"
#include "flexjm/splines.hpp"

namespace flexjm {

// The five structured additive predictors of the joint model: log baseline
// hazard (time-varying), time-constant hazard covariates, the association,
// the longitudinal mean, and the longitudinal log standard deviation.
enum class PredictorId { lambda = 0, gamma = 1, alpha = 2, mu = 3, sigma = 4 };
constexpr int n_predictors = 5;
const char* predictor_name(PredictorId p);

enum class TermKind {
  intercept,
  linear_covariate,
  pspline_covariate,
  pspline_time,
  random_intercept,
  functional_random_intercept,
};

struct TermSpec {
  TermKind kind = TermKind::intercept;
  std::string covariate;  // linear_covariate / pspline_covariate
  int n_basis = 6;        // psplines and the FRI time margin
  int degree = 3;
  int diff_order = 2;
  double hyper_a = 0.001;  // IG hyperprior on the term variance(s)
  double hyper_b = 0.001;
};

// eta_alpha rows are [g1(eta_mu) (x) g2(x, t)] beta plus, for group factors
// combined with a nonlinear g1, one unpenalized intercept per non-reference
// level.
enum class G1Kind { identity, pspline };
enum class G2Kind { constant, covariate, group_factor, pspline_time };

struct AssocSpec {
  G1Kind g1 = G1Kind::identity;
  G2Kind g2 = G2Kind::constant;
  std::string covariate;  // g2 covariate or group factor column
  int n_levels = 0;       // group_factor: number of levels, coded 0..G-1
  int g1_n_basis = 6;
  int g1_degree = 3;
  int g1_diff_order = 2;
  int g2_n_basis = 6;  // pspline_time margin
  int g2_degree = 3;
  int g2_diff_order = 2;
  int grid_size = 100;  // y* grid for the zero-sum constraint
  double hyper_a = 0.001;
  double hyper_b = 0.001;
};

struct JointModelSpec {
  std::vector<TermSpec> lambda, gamma, mu, sigma;
  AssocSpec alpha;
  int quad_nodes = 15;
  double vague_sd = 1000.0;  // N(0, vague_sd^2) prior on unpenalized coefficients
};

// Row contexts a design can be evaluated in: the longitudinal measurement
// rows, one row per subject at the follow-up time, and the quadrature nodes
// (row i * nq + q belongs to subject i).
enum Ctx { ctx_long = 0, ctx_evt = 1, ctx_quad = 2 };

struct CoefBlock {
  std::string name;
  PredictorId pred;
  TermKind kind = TermKind::intercept;
  bool is_alpha = false;
  int dim = 0;

  // Dense terms store full design matrices per context; subject-structured
  // terms (random and functional random intercepts) store the sub_dim
  // nonzero columns of each row, the owning subject being implied by the row.
  bool subject_structured = false;
  int n_sub = 1, sub_dim = 0;
  std::array<Eigen::MatrixXd, 3> X;  // dense designs by context
  std::array<Eigen::MatrixXd, 3> C;  // compact designs by context

  // Prior: optional scalar vague-normal precision on every coordinate,
  // optional per-coordinate additions, and up to two smoothing variances.
  double fixed_prec = 0.0;
  Eigen::VectorXd extra_fixed_prec;
  int n_var = 0;
  Eigen::MatrixXd K1, K2;    // compact penalty factors
  Eigen::MatrixXd K1e, K2e;  // expanded penalties (dense blocks only)
  double rank1 = 0, rank2 = 0;
  // Pseudo-determinant bookkeeping for two-variance blocks: the expanded
  // precision eigenvalues are all pairs eigA_i/tau1^2 + eigB_j/tau2^2, the
  // whole set repeated pdet_mult times.
  Eigen::VectorXd eigA, eigB;
  double pdet_mult = 1.0;
  double ha1 = 0.001, hb1 = 0.001, ha2 = 0.001, hb2 = 0.001;
  int slot1 = -1, slot2 = -1;  // variance slot indices, -1 if unused

  // Curve metadata for exports and tests.
  bool has_basis = false;
  BasisSpec basis;
  Eigen::MatrixXd Z;  // centering transform (original x constrained), if any
  std::string covariate;
};

struct AssocDesign {
  G1Kind g1 = G1Kind::identity;
  G2Kind g2 = G2Kind::constant;
  AlphaConstraint g1c;  // pspline g1 only
  int p1 = 1, p2 = 1;
  int n_levels = 0, n_intercepts = 0;
  std::array<Eigen::MatrixXd, 3> G2;  // g2 columns at ctx_evt / ctx_quad
  Eigen::VectorXi level;              // subject -> factor level
  int dim() const { return p1 * p2 + n_intercepts; }
};

// Mutable per-fit state: coefficients, smoothing variances, and every cached
// evaluation the likelihood needs. Caches are owned here so that candidate
// states can be checkpointed and restored cheaply during sampling.
struct ThetaState {
  std::vector<Eigen::VectorXd> beta;
  std::vector<double> tau2;

  Eigen::VectorXd eta_mu_long, eta_sig_long, invR;             // N rows
  Eigen::VectorXd eta_mu_evt, eta_lam_evt, eta_gam, eta_alpha_evt;  // n rows
  Eigen::VectorXd eta_mu_quad, eta_lam_quad, eta_alpha_quad;   // n*nq rows
  Eigen::MatrixXd g1_evt, g1d_evt, g1dd_evt;     // n x p1
  Eigen::MatrixXd g1_quad, g1d_quad, g1dd_quad;  // n*nq x p1
  Eigen::VectorXd w_evt, v_evt, w_quad, v_quad;  // association chain weights
  Eigen::VectorXd psi_quad;   // exp(eta_lambda + eta_alpha) at the nodes
  Eigen::VectorXd haz_inner;  // per subject: sum_q w_iq psi_iq
  Eigen::VectorXd cumhaz;     // exp(eta_gamma) * haz_inner
  bool overflow = false;      // a hazard exponent was capped; state unusable
};

// Snapshot of the state slices a single-block update can touch.
struct StateCheckpoint {
  int block = -1;
  Eigen::VectorXd beta;
  std::vector<Eigen::VectorXd> vecs;
  std::vector<Eigen::MatrixXd> mats;
  bool overflow = false;
};

class Model {
 public:
  Model(JointModelSpec spec, Dataset data);

  const JointModelSpec& spec() const { return spec_; }
  const Dataset& data() const { return data_; }
  int n() const { return data_.n(); }
  int N() const { return data_.n_obs(); }
  int nq() const { return spec_.quad_nodes; }

  const Eigen::VectorXd& quad_u() const { return quad_u_; }  // n*nq
  const Eigen::VectorXd& quad_w() const { return quad_w_; }  // n*nq

  const std::vector<CoefBlock>& blocks() const { return blocks_; }
  const CoefBlock& block(int b) const { return blocks_[b]; }
  int n_blocks() const { return static_cast<int>(blocks_.size()); }
  int alpha_block() const { return alpha_block_; }
  const std::vector<int>& pred_blocks(PredictorId p) const {
    return pred_blocks_[static_cast<int>(p)];
  }
  const AssocDesign& assoc() const { return assoc_; }
  int n_var_slots() const { return n_var_slots_; }
  const std::vector<std::string>& var_slot_names() const { return var_names_; }

  // Fresh state with zero coefficients, unit variances, caches filled.
  ThetaState make_state() const;
  void refresh_all(ThetaState& s) const;
  // Re-derives every cache affected by a change to beta[b].
  void refresh_after_block(ThetaState& s, int b) const;
  StateCheckpoint checkpoint(const ThetaState& s, int b) const;
  void restore(ThetaState& s, const StateCheckpoint& cp) const;

  // Predictor totals at arbitrary evaluation points (exports, metrics).
  // Spline term design at grid values of its own argument (time/covariate).
  Eigen::MatrixXd term_design_at(int b, const Eigen::VectorXd& x) const;
  // Association rows for arbitrary (eta_mu, t, level) points; t/level are
  // ignored by specializations that do not use them. deriv differentiates
  // g1 with respect to eta_mu.
  Eigen::MatrixXd assoc_design_at(const Eigen::VectorXd& eta, const Eigen::VectorXd& t,
                                  const Eigen::VectorXi& level, int deriv = 0) const;

  // g1 value/derivative rows for one eta_mu value (p1 columns each).
  void g1_rows(double eta, double* g1, double* g1d, double* g1dd) const;

  // Total predictor value at an arbitrary time for one subject, assembling
  // every term of the predictor (splines evaluated at t or at the subject's
  // covariate value, random and functional random intercepts at the
  // subject's own coefficients). The association predictor is excluded; use
  // assoc_design_at for it.
  double eval_predictor(const ThetaState& s, PredictorId pred, int subject,
                        double t) const;

 private:
  void build_quadrature();
  CoefBlock build_term(const TermSpec& term, PredictorId pred);
  void build_assoc();
  void validate_spec() const;
  void refresh_pred(ThetaState& s, PredictorId pred) const;
  void refresh_g1(ThetaState& s) const;
  void refresh_assoc_eta(ThetaState& s) const;
  void refresh_hazard(ThetaState& s) const;
  void refresh_sigma(ThetaState& s) const;

  JointModelSpec spec_;
  Dataset data_;
  Eigen::VectorXd quad_u_, quad_w_;
  std::vector<CoefBlock> blocks_;
  AssocDesign assoc_;
  int alpha_block_ = -1;
  std::array<std::vector<int>, n_predictors> pred_blocks_;
  int n_var_slots_ = 0;
  std::vector<std::string> var_names_;
};

}  // namespace flexjm
