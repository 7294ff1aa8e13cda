// Acceptance gate: ten end-to-end checks of the assembled system, each
// printed as a single PASS/FAIL line with its runtime. The process exits 0
// only if every criterion passes. Individual criteria can be selected by
// number on the command line, e.g. `acceptance 1 4 9`.
#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "flexjm/artifacts.hpp"
#include "flexjm/config.hpp"
#include "flexjm/data.hpp"
#include "flexjm/errors.hpp"
#include "flexjm/estimation.hpp"
#include "flexjm/likelihood.hpp"
#include "flexjm/model.hpp"
#include "flexjm/quadrature.hpp"
#include "flexjm/rng.hpp"
#include "flexjm/simulation.hpp"
#include "flexjm/stats.hpp"
#include "helpers.hpp"

using namespace flexjm;

namespace {

// ---------------------------------------------------------------------------
// shared utilities

int block_named(const Model& m, const std::string& name) {
  for (int b = 0; b < m.n_blocks(); ++b)
    if (m.block(b).name == name) return b;
  throw std::runtime_error("no block named " + name);
}

Dataset sim_data(int setting, int n, unsigned seed, double keep = 0.1,
                 bool censor = true) {
  SimConfig sc;
  sc.setting = setting;
  sc.n = n;
  sc.seed = seed;
  sc.keep_fraction = keep;
  sc.uniform_censoring = censor;
  return simulate_dataset(sc).data;
}

// Small model exercising every block type: dense smooths in two predictors,
// a linear survival covariate, random and functional random intercepts.
JointModelSpec derivative_spec(bool nonlinear_assoc) {
  JointModelSpec s;
  s.lambda = {TermSpec{TermKind::intercept, "", 6, 3, 2, 0.001, 0.001},
              TermSpec{TermKind::pspline_time, "", 6, 3, 2, 0.001, 0.001}};
  s.gamma = {TermSpec{TermKind::linear_covariate, "x1", 6, 3, 2, 0.001, 0.001}};
  s.mu = {TermSpec{TermKind::intercept, "", 6, 3, 2, 0.001, 0.001},
          TermSpec{TermKind::pspline_time, "", 5, 3, 2, 0.001, 0.001},
          TermSpec{TermKind::pspline_covariate, "x2", 6, 3, 2, 0.001, 0.001},
          TermSpec{TermKind::random_intercept, "", 6, 3, 2, 0.001, 0.001},
          TermSpec{TermKind::functional_random_intercept, "", 4, 3, 2, 0.001,
                   0.001}};
  s.sigma = {TermSpec{TermKind::intercept, "", 6, 3, 2, 0.001, 0.001}};
  s.alpha = AssocSpec{};  // identity x constant
  if (nonlinear_assoc) {
    s.alpha.g1 = G1Kind::pspline;
    s.alpha.g1_n_basis = 6;
  }
  s.quad_nodes = 7;
  return s;
}

void randomize_state(const Model& m, ThetaState& s, Rng& rng, double scale) {
  for (int b = 0; b < m.n_blocks(); ++b)
    for (Eigen::Index j = 0; j < s.beta[b].size(); ++j)
      s.beta[b][j] = scale * rng.normal();
  for (double& t : s.tau2) t = std::pow(10.0, rng.uniform(-1.0, 1.0));
  m.refresh_all(s);
}

// Constraint residuals harvested from every nonlinear-association fit the
// gate performs; criterion 7 audits them.
struct ConstraintRecord {
  std::string what;
  double residual;
};
std::vector<ConstraintRecord> g_constraints;

// |1' X beta| of each centered smooth at its anchoring rows, and the y*-grid
// sum of the association curve, across all kept draws.
void harvest_constraints(const Model& m, const FitResult& fit,
                         const std::string& tag) {
  for (int b = 0; b < m.n_blocks(); ++b) {
    const CoefBlock& blk = m.block(b);
    if (!blk.has_basis || blk.subject_structured || blk.Z.size() == 0)
      continue;
    if (b == m.alpha_block()) continue;  // the grid constraint, handled below
    const bool long_home = blk.name.rfind("mu.", 0) == 0 ||
                           blk.name.rfind("sigma.", 0) == 0;
    const Eigen::MatrixXd& X = blk.X[long_home ? ctx_long : ctx_evt];
    const Eigen::RowVectorXd colsum = X.colwise().sum();
    double worst = 0.0;
    for (Eigen::Index d = 0; d < fit.beta_draws[b].rows(); ++d)
      worst = std::max(worst,
                       std::fabs(colsum.dot(fit.beta_draws[b].row(d))));
    g_constraints.push_back({tag + " " + blk.name, worst});
  }
  if (m.assoc().g1 == G1Kind::pspline) {
    const Eigen::VectorXd& grid = m.assoc().g1c.grid;
    const Eigen::VectorXd t0 = Eigen::VectorXd::Zero(grid.size());
    const Eigen::VectorXi lev = Eigen::VectorXi::Zero(grid.size());
    const Eigen::MatrixXd A = m.assoc_design_at(grid, t0, lev, 0);
    const Eigen::RowVectorXd colsum = A.colwise().sum();
    const int ab = m.alpha_block();
    double worst = 0.0;
    for (Eigen::Index d = 0; d < fit.beta_draws[ab].rows(); ++d)
      worst = std::max(worst,
                       std::fabs(colsum.dot(fit.beta_draws[ab].row(d))));
    g_constraints.push_back({tag + " alpha y*-grid", worst});
  }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------
// criterion 1: analytic derivatives against finite differences

bool c1_derivatives(std::string& detail) {
  const Dataset data = sim_data(1, 10, 101, 0.4);
  for (const bool nonlinear : {false, true}) {
    const Model m(derivative_spec(nonlinear), data);
    Rng rng(nonlinear ? 11u : 7u);
    for (int state = 0; state < 20; ++state) {
      ThetaState st = m.make_state();
      int attempts = 0;
      do {
        randomize_state(m, st, rng, 0.3);
      } while (st.overflow && ++attempts < 100);
      if (st.overflow) {
        detail = "could not draw a finite random state";
        return false;
      }
      for (int b = 0; b < m.n_blocks(); ++b) {
        const BlockDerivs dv = score_hessian(m, st, b, true);
        const int p = m.block(b).dim;

        Eigen::VectorXd g_fd(p);
        for (int j = 0; j < p; ++j) {
          const double h = 1e-5 * std::max(1.0, std::fabs(st.beta[b][j]));
          ThetaState sp = st, sm = st;
          sp.beta[b][j] += h;
          sm.beta[b][j] -= h;
          m.refresh_all(sp);
          m.refresh_all(sm);
          g_fd[j] = (log_posterior(m, sp) - log_posterior(m, sm)) / (2 * h);
        }
        const double gscale = std::max(1.0, dv.score.cwiseAbs().maxCoeff());
        const double gerr =
            (g_fd - dv.score).cwiseAbs().maxCoeff() / gscale;
        if (gerr > 1e-5) {
          std::ostringstream os;
          os << (nonlinear ? "nonlinear" : "linear") << " state " << state
             << " block " << m.block(b).name << ": score rel err " << gerr;
          detail = os.str();
          return false;
        }

        const Eigen::MatrixXd H = dv.hess.to_dense();
        Eigen::MatrixXd H_fd(p, p);
        for (int j = 0; j < p; ++j) {
          const double h = 1e-4 * std::max(1.0, std::fabs(st.beta[b][j]));
          ThetaState sp = st, sm = st;
          sp.beta[b][j] += h;
          sm.beta[b][j] -= h;
          m.refresh_all(sp);
          m.refresh_all(sm);
          H_fd.col(j) = (score_hessian(m, sp, b, true).score -
                         score_hessian(m, sm, b, true).score) /
                        (2 * h);
        }
        const double hscale = std::max(1.0, H.cwiseAbs().maxCoeff());
        const double herr = (H - H_fd).cwiseAbs().maxCoeff() / hscale;
        if (herr > 1e-4) {
          std::ostringstream os;
          os << (nonlinear ? "nonlinear" : "linear") << " state " << state
             << " block " << m.block(b).name << ": Hessian rel err " << herr;
          detail = os.str();
          return false;
        }
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// criterion 2: conjugate variance draws against the analytic inverse gamma

bool c2_conjugacy(std::string& detail) {
  const Dataset data = sim_data(1, 10, 101, 0.4);
  const Model m(derivative_spec(true), data);
  ThetaState s = m.make_state();
  Rng init(5);
  const int b = block_named(m, "mu.s(time)");
  for (Eigen::Index j = 0; j < s.beta[b].size(); ++j)
    s.beta[b][j] = 0.5 * init.normal();
  m.refresh_all(s);

  const CoefBlock& blk = m.block(b);
  const double a_post = blk.ha1 + 0.5 * blk.rank1 * blk.pdet_mult;
  const double b_post = blk.hb1 + 0.5 * penalty_quadform(m, s, b, 1);

  Rng rng(17);
  std::vector<double> draws(10000);
  for (double& x : draws) {
    gibbs_variance(m, s, b, rng);
    x = s.tau2[blk.slot1];
  }
  const double p = testutil::ks_test(
      draws, [&](double x) { return inv_gamma_cdf(x, a_post, b_post); });
  std::ostringstream os;
  os << "KS p = " << p << " against IG(" << a_post << ", " << b_post << ")";
  detail = os.str();
  return p > 0.01;
}

// ---------------------------------------------------------------------------
// criterion 3: exact-Gibbs limit of the Taylor proposal

bool c3_exact_gibbs(std::string& detail) {
  // With a zero identity-association coefficient the survival likelihood is
  // flat in the longitudinal coefficients, so every mu block has an exactly
  // Gaussian full conditional and the Taylor proposal IS that conditional.
  JointModelSpec spec;
  spec.lambda = {TermSpec{TermKind::intercept, "", 6, 3, 2, 0.001, 0.001}};
  spec.gamma = {TermSpec{TermKind::linear_covariate, "x1", 6, 3, 2, 0.001, 0.001}};
  spec.mu = {TermSpec{TermKind::intercept, "", 6, 3, 2, 0.001, 0.001},
             TermSpec{TermKind::pspline_time, "", 5, 3, 2, 0.001, 0.001},
             TermSpec{TermKind::random_intercept, "", 6, 3, 2, 0.001, 0.001}};
  spec.sigma = {TermSpec{TermKind::intercept, "", 6, 3, 2, 0.001, 0.001}};
  spec.alpha = AssocSpec{};
  spec.quad_nodes = 7;
  const Model m(spec, sim_data(1, 40, 55, 0.3));

  ThetaState s = m.make_state();  // beta_alpha stays exactly 0
  m.refresh_all(s);
  Rng rng(23);
  const int blocks[] = {block_named(m, "mu.intercept"),
                        block_named(m, "mu.s(time)"),
                        block_named(m, "mu.ri(id)")};
  double worst = 0.0;
  for (int it = 0; it < 100; ++it) {
    for (const int b : blocks) {
      bool accepted = false;
      const double lr = mh_block_update(m, s, b, rng, &accepted);
      worst = std::max(worst, std::fabs(lr));
      if (!accepted) {
        detail = "a proposal from the exact conditional was rejected";
        return false;
      }
    }
  }
  std::ostringstream os;
  os << "max |log ratio| = " << worst << " over 100 iterations x 3 blocks";
  detail = os.str();
  return worst <= 1e-8;
}

// ---------------------------------------------------------------------------
// criterion 4: generated survival times against the analytic survivor curve

bool c4_inversion(std::string& detail) {
  SimConfig cfg;
  cfg.setting = 1;
  cfg.n = 10000;
  cfg.uniform_censoring = false;  // isolate the inversion
  cfg.keep_fraction = 0.02;
  cfg.seed = 202;
  const SimOutput sim = simulate_dataset(cfg);

  // Analytic reference: the mixture of the subjects' own survivor functions
  // under the same random effects, with the cumulative hazard accumulated in
  // unit panels. With censoring only at the horizon the Kaplan-Meier
  // estimator equals the empirical survivor fraction.
  const int nt = 120;
  Eigen::VectorXd S_analytic = Eigen::VectorXd::Zero(nt);
  const QuadratureRule rule = QuadratureRule::gauss_legendre(10);
  for (int i = 0; i < cfg.n; ++i) {
    double cum = 0.0;
    for (int k = 0; k < nt; ++k) {
      const double half = 0.5, mid = k + 0.5;
      for (int q = 0; q < rule.nodes.size(); ++q)
        cum += half * rule.weights[q] *
               sim.truth.hazard(i, mid + half * rule.nodes[q]);
      S_analytic[k] += std::exp(-cum);
    }
  }
  S_analytic /= cfg.n;

  double sup = 0.0;
  for (int k = 0; k < nt; ++k) {
    const double t = k + 1.0;
    const double S_emp =
        (sim.latent_event_time.array() >= t).cast<double>().mean();
    sup = std::max(sup, std::fabs(S_emp - S_analytic[k]));
  }
  std::ostringstream os;
  os << "sup |KM - S| = " << sup << " on t in [1,120], n = " << cfg.n;
  detail = os.str();
  return sup < 0.02;
}

// ---------------------------------------------------------------------------
// criterion 5: average association slope recovery at desk scale

bool c5_recovery(std::string& detail) {
  int hits = 0;
  std::ostringstream os;
  os << "slopes:";
  for (int rep = 0; rep < 10; ++rep) {
    const Dataset data = sim_data(1, 300, 1000 + rep);
    const Model m(setting_fit_spec(1), data);
    FitOptions fo;
    fo.mcmc_iters = 3000;
    fo.burnin = 1000;
    fo.thin = 2;
    fo.seed = 40 + rep;
    const FitResult fit = run_mcmc(m, fo);
    const double slope = alpha_slope_draws(m, fit.beta_draws).mean();
    harvest_constraints(m, fit, "setting1 rep " + std::to_string(rep));
    if (slope >= 0.8 && slope <= 1.2) ++hits;
    os << (rep ? ", " : " ") << std::round(slope * 1000) / 1000;
    std::printf("  [5] replicate %d/10: slope %.3f\n", rep + 1, slope);
    std::fflush(stdout);
  }
  os << " -> " << hits << "/10 in [0.8, 1.2]";
  detail = os.str();
  return hits >= 8;
}

// ---------------------------------------------------------------------------
// criterion 6: nonlinearity detection and DIC preference on Setting 2

bool c6_nonlinearity(std::string& detail) {
  int curve_hits = 0, dic_hits = 0;
  std::ostringstream os;
  for (int rep = 0; rep < 5; ++rep) {
    const Dataset data = sim_data(2, 300, 2000 + rep);
    FitOptions fo;
    fo.mcmc_iters = 3000;
    fo.burnin = 1000;
    fo.thin = 2;
    fo.seed = 50 + rep;

    const Model m_nl(setting_fit_spec(2), data);
    const FitResult fit_nl = run_mcmc(m_nl, fo);
    harvest_constraints(m_nl, fit_nl, "setting2 rep " + std::to_string(rep));

    // pointwise posterior band of the association curve on the marker grid
    const int ng = 120;
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(ng, -0.5, 2.0);
    const Eigen::VectorXd t0 = Eigen::VectorXd::Zero(ng);
    const Eigen::VectorXi lev = Eigen::VectorXi::Zero(ng);
    const Eigen::MatrixXd A = m_nl.assoc_design_at(grid, t0, lev, 0);
    const Eigen::MatrixXd& B = fit_nl.beta_draws[m_nl.alpha_block()];
    const Eigen::MatrixXd curves = B * A.transpose();  // kept x ng
    Eigen::VectorXd mean(ng), lo(ng), hi(ng);
    for (int k = 0; k < ng; ++k) {
      const ChainStats st = summarize(curves.col(k));
      mean[k] = st.mean;
      lo[k] = st.q025;
      hi[k] = st.q975;
    }
    // best-fitting line to the posterior-mean curve
    const double gbar = grid.mean(), mbar = mean.mean();
    const Eigen::VectorXd gc = grid.array() - gbar;
    const double slope = gc.dot(mean.array().matrix() - Eigen::VectorXd::Constant(ng, mbar)) /
                         gc.squaredNorm();
    const double icept = mbar - slope * gbar;
    int outside = 0;
    for (int k = 0; k < ng; ++k) {
      const double line = icept + slope * grid[k];
      if (line < lo[k] || line > hi[k]) ++outside;
    }
    if (outside >= ng / 10) ++curve_hits;

    // a linear association fit of the same data must pay in DIC
    JointModelSpec lin = setting_fit_spec(2);
    lin.alpha = AssocSpec{};  // identity x constant
    const Model m_lin(lin, data);
    const FitResult fit_lin = run_mcmc(m_lin, fo);
    if (fit_lin.dic > fit_nl.dic) ++dic_hits;

    std::printf("  [6] replicate %d/5: %d/120 grid points exclude the line, "
                "DIC nonlinear %.2f vs linear %.2f\n",
                rep + 1, outside, fit_nl.dic, fit_lin.dic);
    std::fflush(stdout);
    os << (rep ? "; " : "") << outside << " pts, dDIC "
       << std::round((fit_lin.dic - fit_nl.dic) * 100) / 100;
  }
  os << " -> curve " << curve_hits << "/5, DIC " << dic_hits << "/5";
  detail = os.str();
  return curve_hits >= 4 && dic_hits >= 4;
}

// ---------------------------------------------------------------------------
// criterion 7: constraint enforcement on every nonlinear fit of the gate

bool c7_constraints(std::string& detail) {
  if (g_constraints.empty()) {
    // criteria 5/6 were not run in this invocation; audit one dedicated fit
    const Dataset data = sim_data(1, 120, 1500, 0.15);
    const Model m(setting_fit_spec(1), data);
    FitOptions fo;
    fo.mcmc_iters = 1200;
    fo.burnin = 400;
    fo.thin = 2;
    fo.seed = 3;
    const FitResult fit = run_mcmc(m, fo);
    harvest_constraints(m, fit, "dedicated");
  }
  double worst = 0.0;
  std::string worst_what;
  for (const ConstraintRecord& r : g_constraints)
    if (r.residual > worst) {
      worst = r.residual;
      worst_what = r.what;
    }
  std::ostringstream os;
  os << g_constraints.size() << " constraints audited, worst |sum| = "
     << worst << " (" << worst_what << ")";
  detail = os.str();
  return worst <= 1e-8;
}

// ---------------------------------------------------------------------------
// criterion 8: cumulative hazards under 7 vs 15 quadrature nodes

bool c8_quadrature(std::string& detail) {
  // The stability claim is about the generator's hazard family: for every
  // subject of a simulated dataset, integrating the true hazard over
  // [0, T_i] with 7 and with 15 Gauss-Legendre nodes must agree to rel 1e-4.
  SimConfig sc;
  sc.setting = 1;
  sc.n = 300;
  sc.seed = 1000;
  const SimOutput out = simulate_dataset(sc);

  const QuadratureRule r7 = QuadratureRule::gauss_legendre(7);
  const QuadratureRule r15 = QuadratureRule::gauss_legendre(15);
  double worst = 0.0;
  for (int i = 0; i < sc.n; ++i) {
    const double T = out.data.time[i];
    Eigen::VectorXd u, w;
    auto integral = [&](const QuadratureRule& r) {
      r.rescale(T, u, w);
      Eigen::VectorXd psi(u.size());
      for (int q = 0; q < u.size(); ++q) psi[q] = out.truth.hazard(i, u[q]);
      return cumulative_hazard(w, psi, 1.0);
    };
    worst = std::max(worst,
                     std::abs(integral(r15) - integral(r7)) / integral(r15));
  }
  std::ostringstream os;
  os << "max rel difference " << worst << " over " << sc.n
     << " subjects on the generator hazard";
  detail = os.str();
  return worst < 1e-4;
}

// ---------------------------------------------------------------------------
// criterion 9: byte-identical chains under identical seed and config

bool c9_reproducibility(std::string& detail) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "flexjm_acceptance_repro";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const Dataset data = sim_data(1, 50, 77, 0.15);
  const RunConfig cfg{setting_fit_spec(1), FitOptions{}};
  const std::string hash = config_hash(cfg);
  const Model m(cfg.model, data);
  FitOptions fo = cfg.fit;
  fo.mcmc_iters = 600;
  fo.burnin = 200;
  fo.thin = 2;
  fo.seed = 9;

  const FitResult f1 = run_mcmc(m, fo);
  const FitResult f2 = run_mcmc(m, fo);
  write_chain_csv(m, f1, fo, hash, (dir / "a.csv").string());
  write_chain_csv(m, f2, fo, hash, (dir / "b.csv").string());
  const bool identical = slurp((dir / "a.csv").string()) ==
                         slurp((dir / "b.csv").string());

  FitOptions fo2 = fo;
  fo2.seed = 10;
  const FitResult f3 = run_mcmc(m, fo2);
  write_chain_csv(m, f3, fo2, hash, (dir / "c.csv").string());
  const bool differs = slurp((dir / "a.csv").string()) !=
                       slurp((dir / "c.csv").string());

  detail = std::string("same seed ") +
           (identical ? "byte-identical" : "DIFFERS") + ", changed seed " +
           (differs ? "differs" : "IDENTICAL");
  return identical && differs;
}

// ---------------------------------------------------------------------------
// criterion 10: gamma coverage across replicates

bool c10_coverage(std::string& detail) {
  int hits = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const Dataset data = sim_data(1, 300, 3000 + rep);
    const Model m(setting_fit_spec(1), data);
    FitOptions fo;
    fo.mcmc_iters = 1500;
    fo.burnin = 500;
    fo.thin = 2;
    fo.seed = 60 + rep;
    const FitResult fit = run_mcmc(m, fo);
    const int b = block_named(m, "gamma.x1");
    const ChainStats st = summarize(fit.beta_draws[b].col(0));
    const bool covered = st.q025 <= 0.3 && 0.3 <= st.q975;
    if (covered) ++hits;
    std::printf("  [10] replicate %d/20: gamma 95%% CI [%.3f, %.3f] %s\n",
                rep + 1, st.q025, st.q975,
                covered ? "covers 0.3" : "misses 0.3");
    std::fflush(stdout);
  }
  std::ostringstream os;
  os << hits << "/20 intervals cover the true effect 0.3";
  detail = os.str();
  return hits >= 16;
}

struct Criterion {
  int id;
  const char* label;
  std::function<bool(std::string&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "analytic score and Hessian blocks match finite differences "
          "(20 random states, linear and nonlinear association)",
       c1_derivatives},
      {2, "conjugate variance draws pass a KS test against the analytic "
          "inverse gamma conditional (1e4 draws)",
       c2_conjugacy},
      {3, "Taylor-proposal MH on an exactly Gaussian conditional has "
          "|acceptance log ratio| <= 1e-8 for 100 consecutive iterations",
       c3_exact_gibbs},
      {4, "Kaplan-Meier of 1e4 generated Setting-1 times matches the "
          "analytic survivor curve within 2% sup-norm on [1,120]",
       c4_inversion},
      {5, "posterior-mean average association slope in [0.8, 1.2] on >= 8/10 "
          "Setting-1 replicates (n = 300, chains 3000/1000)",
       c5_recovery},
      {6, "Setting-2 association bands exclude the best-fitting line on "
          ">= 10% of grid points and the linear fit has higher DIC, each in "
          ">= 4/5 replicates",
       c6_nonlinearity},
      {7, "fitted association curves sum to zero on the y* grid and every "
          "centered smooth sums to zero at its anchors, within 1e-8",
       c7_constraints},
      {8, "per-subject cumulative hazards with 7 vs 15 quadrature nodes "
          "agree to rel 1e-4",
       c8_quadrature},
      {9, "identical seed and configuration reproduce the chain file byte "
          "for byte",
       c9_reproducibility},
      {10, "95% interval for the survival covariate effect covers the truth "
           "in >= 16/20 replicates",
       c10_coverage},
  };

  std::set<int> wanted;
  for (int a = 1; a < argc; ++a) wanted.insert(std::atoi(argv[a]));

  int failures = 0, ran = 0;
  for (const Criterion& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    std::string detail;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::printf("%s %2d. %s [%.1f s]\n", ok ? "PASS" : "FAIL", c.id, c.label,
                secs);
    if (!detail.empty()) std::printf("        %s\n", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  std::printf("acceptance: %d/%d criteria passed\n", ran - failures, ran);
  return failures == 0 ? 0 : 1;
}
