// Likelihood, prior, and derivative tests. Closed-form values were fixed
// ahead of time with an independent computation (scipy.stats for the inverse
// gamma densities, exact arithmetic for the rest); gradients and Hessians
// are checked against central finite differences of the log posterior.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "flexjm/errors.hpp"
#include "flexjm/likelihood.hpp"
#include "flexjm/model.hpp"
#include "flexjm/quadrature.hpp"
#include "flexjm/rng.hpp"
#include "helpers.hpp"

using namespace flexjm;

namespace {

Dataset toy_data() {
  Dataset d;
  d.ids = {"a", "b", "c", "e"};
  d.time.resize(4);
  d.time << 2.0, 1.5, 3.0, 2.5;
  d.event.resize(4);
  d.event << 1, 0, 1, 1;
  Eigen::VectorXd x1(4), g3(4);
  x1 << -1.0, 0.5, 2.0, -0.3;
  g3 << 0, 1, 2, 1;
  d.covars["x1"] = x1;
  d.covars["g3"] = g3;
  d.subj.resize(10);
  d.subj << 0, 0, 0, 1, 1, 2, 2, 2, 2, 3;
  d.t.resize(10);
  d.t << 0.0, 0.5, 1.0, 0.2, 1.0, 0.0, 1.0, 2.0, 2.9, 0.5;
  d.y.resize(10);
  d.y << 1.0, 1.2, 0.8, 0.4, 0.6, -0.2, 0.1, 0.5, 0.3, 0.9;
  return d;
}

// Rich model touching every derivative path: spline baseline hazard, linear
// gamma, nonlinear association with group levels, spline + functional random
// intercept mean, spline sigma.
JointModelSpec rich_spec() {
  JointModelSpec s;
  s.lambda = {TermSpec{TermKind::intercept, "", 6, 3, 2, 0.001, 0.001},
              TermSpec{TermKind::pspline_time, "", 5, 3, 2, 0.001, 0.001}};
  s.gamma = {TermSpec{TermKind::linear_covariate, "x1", 6, 3, 2, 0.001, 0.001}};
  s.mu = {TermSpec{TermKind::intercept, "", 6, 3, 2, 0.001, 0.001},
          TermSpec{TermKind::pspline_time, "", 5, 3, 2, 0.001, 0.001},
          TermSpec{TermKind::functional_random_intercept, "", 4, 3, 2, 0.001, 0.001}};
  s.sigma = {TermSpec{TermKind::intercept, "", 6, 3, 2, 0.001, 0.001},
             TermSpec{TermKind::pspline_covariate, "x1", 5, 3, 2, 0.001, 0.001}};
  s.alpha.g1 = G1Kind::pspline;
  s.alpha.g1_n_basis = 6;
  s.alpha.g2 = G2Kind::group_factor;
  s.alpha.covariate = "g3";
  s.alpha.n_levels = 3;
  s.quad_nodes = 15;
  return s;
}

void randomize(const Model& m, ThetaState& s, unsigned seed, double scale) {
  Rng rng(seed);
  for (auto& b : s.beta)
    for (Eigen::Index j = 0; j < b.size(); ++j) b[j] = scale * rng.normal();
  for (auto& t : s.tau2) t = 0.5 + 0.5 * rng.uniform01();
  m.refresh_all(s);
}

double simpson(const std::function<double(double)>& f, double a, double b,
               double fa, double fm, double fb, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
  const double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, flm, fm, tol / 2, depth - 1) +
         simpson(f, m, b, fm, frm, fb, tol / 2, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-11) {
  const double m = 0.5 * (a + b);
  return simpson(f, a, b, f(a), f(m), f(b), tol, 40);
}

}  // namespace

TEST_CASE("longitudinal log likelihood matches a two-row closed form") {
  Dataset d;
  d.ids = {"a", "b"};
  d.time.resize(2);
  d.time << 1.0, 1.0;
  d.event.resize(2);
  d.event << 1, 0;
  d.subj.resize(2);
  d.subj << 0, 1;
  d.t.resize(2);
  d.t << 0.5, 0.5;
  d.y.resize(2);
  d.y << 1.0, -0.5;
  JointModelSpec sp;
  sp.lambda = {TermSpec{}};
  sp.mu = {TermSpec{}};
  sp.sigma = {TermSpec{}};
  sp.quad_nodes = 7;
  Model m(sp, d);
  ThetaState st = m.make_state();
  st.eta_mu_long << 0.5, 0.0;
  st.eta_sig_long << 0.1, -0.2;
  st.invR << std::exp(-0.2), std::exp(0.4);
  CHECK(loglik_long(m, st) == doctest::Approx(-2.02669649774925).epsilon(1e-12));

  st.eta_lam_evt << 0.3, -0.1;
  st.eta_gam << 0.2, 0.0;
  st.eta_alpha_evt << -0.4, 0.5;
  st.cumhaz << 0.7, 1.2;
  CHECK(loglik_surv(m, st) == doctest::Approx(-1.8).epsilon(1e-12));
}

TEST_CASE("inverse gamma log density against frozen references") {
  CHECK(ig_logpdf(1.7, 0.001, 0.001) == doctest::Approx(-7.44583375527018).epsilon(1e-12));
  CHECK(ig_logpdf(0.5, 3.0, 2.0) == doctest::Approx(0.158883083359672).epsilon(1e-12));
  CHECK(ig_logpdf(2.0, 1.5, 0.7) == doctest::Approx(-2.49709812967272).epsilon(1e-12));
  CHECK(ig_logpdf(-1.0, 1.0, 1.0) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("constant hazard is integrated exactly at any node count") {
  Dataset d = toy_data();
  for (int k : {2, 7, 15}) {
    JointModelSpec sp;
    sp.lambda = {TermSpec{}};
    sp.mu = {TermSpec{}};
    sp.sigma = {TermSpec{}};
    sp.quad_nodes = k;
    Model m(sp, d);
    ThetaState st = m.make_state();
    st.beta[0][0] = -0.7;  // lambda intercept
    m.refresh_all(st);
    for (int i = 0; i < 4; ++i)
      CHECK(st.cumhaz[i] ==
            doctest::Approx(std::exp(-0.7) * d.time[i]).epsilon(1e-13));
    const double ll = loglik_surv(m, st);
    const double want = -0.7 * d.event.sum() - std::exp(-0.7) * d.time.sum();
    CHECK(ll == doctest::Approx(want).epsilon(1e-13));
  }
}

TEST_CASE("polynomial integrand reproduces the exact cumulative hazard") {
  QuadratureRule rule = QuadratureRule::gauss_legendre(7);
  Eigen::VectorXd u, w;
  rule.rescale(2.5, u, w);
  const Eigen::VectorXd psi = u.array().pow(3) + 2.0 * u.array();
  CHECK(cumulative_hazard(w, psi, std::exp(0.3)) ==
        doctest::Approx(21.6188324650844).epsilon(1e-12));
}

TEST_CASE("cumulative hazard agrees with adaptive quadrature on a rich model") {
  Model m(rich_spec(), toy_data());
  ThetaState st = m.make_state();
  randomize(m, st, 5, 0.2);

  // Independent evaluation of exp(eta_lambda(s) + eta_alpha(eta_mu(s), s))
  // from the block designs, integrated adaptively.
  const auto& d = m.data();
  const int lsb = 1;  // lambda.s(time)
  int msb = -1, mib = -1, fri = -1;
  for (int b = 0; b < m.n_blocks(); ++b) {
    if (m.block(b).name == "mu.s(time)") msb = b;
    if (m.block(b).name == "mu.intercept") mib = b;
    if (m.block(b).name == "mu.fri(id,time)") fri = b;
  }
  REQUIRE(msb >= 0);
  const int sd = m.block(fri).sub_dim;

  for (int i = 0; i < m.n(); ++i) {
    auto eta_mu = [&](double s) {
      Eigen::VectorXd x(1);
      x << s;
      double v = st.beta[mib][0];
      v += (m.term_design_at(msb, x) * st.beta[msb])(0);
      v += (m.term_design_at(fri, x) * st.beta[fri].segment(i * sd, sd))(0);
      return v;
    };
    auto integrand = [&](double s) {
      Eigen::VectorXd x(1), e(1), tt(1);
      x << s;
      e << eta_mu(s);
      tt << 0.0;
      Eigen::VectorXi lev(1);
      lev << m.assoc().level[i];
      double lam = st.beta[0][0] + (m.term_design_at(lsb, x) * st.beta[lsb])(0);
      double al = (m.assoc_design_at(e, tt, lev, 0) * st.beta[m.alpha_block()])(0);
      return std::exp(lam + al);
    };
    const double want = std::exp(st.eta_gam[i]) * integrate(integrand, 0.0, d.time[i]);
    CHECK(st.cumhaz[i] == doctest::Approx(want).epsilon(2e-6));
  }
}

TEST_CASE("quadrature refinement: 7 vs 15 nodes agree to 1e-4") {
  JointModelSpec sp7 = rich_spec(), sp15 = rich_spec();
  sp7.quad_nodes = 7;
  sp15.quad_nodes = 15;
  Model m7(sp7, toy_data()), m15(sp15, toy_data());
  ThetaState s7 = m7.make_state(), s15 = m15.make_state();
  randomize(m7, s7, 5, 0.2);
  s15.beta = s7.beta;
  s15.tau2 = s7.tau2;
  m15.refresh_all(s15);
  for (int i = 0; i < m7.n(); ++i)
    CHECK(testutil::rel_err(s7.cumhaz[i], s15.cumhaz[i]) < 1e-4);
  CHECK(testutil::rel_err(loglik_surv(m7, s7), loglik_surv(m15, s15)) < 1e-4);
}

TEST_CASE("score matches finite differences of the log posterior") {
  Model m(rich_spec(), toy_data());
  ThetaState st = m.make_state();
  randomize(m, st, 11, 0.15);

  const double h = 1e-5;
  for (int b = 0; b < m.n_blocks(); ++b) {
    CAPTURE(m.block(b).name);
    BlockDerivs dv = score_hessian(m, st, b, true);
    auto f = [&](const Eigen::VectorXd& v) {
      ThetaState s2 = st;
      s2.beta[b] = v;
      m.refresh_all(s2);
      return log_posterior(m, s2);
    };
    const Eigen::VectorXd fd = testutil::fd_gradient(f, st.beta[b], h);
    const double scale = std::max(1.0, dv.score.cwiseAbs().maxCoeff());
    CHECK((fd - dv.score).cwiseAbs().maxCoeff() / scale < 1e-4);
  }
}

TEST_CASE("Hessian matches finite differences of the score") {
  Model m(rich_spec(), toy_data());
  ThetaState st = m.make_state();
  randomize(m, st, 13, 0.15);

  const double h = 1e-4;
  for (int b = 0; b < m.n_blocks(); ++b) {
    CAPTURE(m.block(b).name);
    BlockDerivs dv = score_hessian(m, st, b, true);
    const Eigen::MatrixXd H = dv.hess.to_dense();
    const int p = m.block(b).dim;
    Eigen::MatrixXd Hfd(p, p);
    for (int j = 0; j < p; ++j) {
      ThetaState sp = st, sm = st;
      sp.beta[b][j] += h;
      sm.beta[b][j] -= h;
      m.refresh_all(sp);
      m.refresh_all(sm);
      Hfd.col(j) = (score_hessian(m, sp, b, true).score -
                    score_hessian(m, sm, b, true).score) /
                   (2 * h);
    }
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    CHECK((H - Hfd).cwiseAbs().maxCoeff() / scale < 1e-4);
    // block-diagonal blocks must really be block diagonal
    if (m.block(b).subject_structured) {
      const int sd = m.block(b).sub_dim;
      Eigen::MatrixXd off = Hfd;
      for (int i = 0; i < m.block(b).n_sub; ++i)
        off.block(i * sd, i * sd, sd, sd).setZero();
      CHECK(off.cwiseAbs().maxCoeff() / scale < 1e-4);
    }
  }
}

TEST_CASE("identity association reduces the mu derivatives to closed form") {
  JointModelSpec sp = rich_spec();
  sp.alpha = AssocSpec{};  // identity * constant
  sp.mu = {TermSpec{TermKind::intercept, "", 6, 3, 2, 0.001, 0.001}};
  Model m(sp, toy_data());
  ThetaState st = m.make_state();
  randomize(m, st, 17, 0.2);

  const double ba = st.beta[m.alpha_block()][0];
  int mib = -1;
  for (int b = 0; b < m.n_blocks(); ++b)
    if (m.block(b).name == "mu.intercept") mib = b;
  REQUIRE(mib >= 0);
  BlockDerivs dv = score_hessian(m, st, mib, false);
  // longitudinal part + ba * (delta - Lambda) summed over subjects
  const Eigen::VectorXd res = m.data().y - st.eta_mu_long;
  double want = res.cwiseProduct(st.invR).sum();
  for (int i = 0; i < m.n(); ++i)
    want += ba * (m.data().event[i] - st.cumhaz[i]);
  CHECK(dv.score[0] == doctest::Approx(want).epsilon(1e-10));
  double wanth = -st.invR.sum();
  for (int i = 0; i < m.n(); ++i) wanth -= ba * ba * st.cumhaz[i];
  CHECK(dv.hess.to_dense()(0, 0) == doctest::Approx(wanth).epsilon(1e-10));
}

TEST_CASE("smoothing prior: single variance closed form") {
  JointModelSpec sp = rich_spec();
  Model m(sp, toy_data());
  ThetaState st = m.make_state();
  randomize(m, st, 19, 0.3);
  const int b = 1;  // lambda.s(time)
  const CoefBlock& blk = m.block(b);
  REQUIRE(blk.n_var == 1);
  const double t1 = st.tau2[blk.slot1];
  const double q = st.beta[b].dot(blk.K1e * st.beta[b]);
  const double want = -0.5 * blk.rank1 * std::log(t1) - 0.5 * q / t1;
  CHECK(log_smooth_prior(m, st, b) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("smoothing prior: paired eigenvalues match a numeric pseudo-determinant") {
  // functional random intercept: expanded precision is block diagonal with
  // identical blocks I/tau1 + K/tau2
  Model m(rich_spec(), toy_data());
  ThetaState st = m.make_state();
  randomize(m, st, 23, 0.3);
  int fri = -1;
  for (int b = 0; b < m.n_blocks(); ++b)
    if (m.block(b).name == "mu.fri(id,time)") fri = b;
  REQUIRE(fri >= 0);
  const CoefBlock& blk = m.block(fri);
  const double t1 = st.tau2[blk.slot1], t2 = st.tau2[blk.slot2];

  const Eigen::MatrixXd Pfull =
      prior_precision(m, st.tau2, fri).to_dense();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Pfull, Eigen::EigenvaluesOnly);
  const double cutoff = 1e-10 * es.eigenvalues().maxCoeff();
  double logpdet = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()[i] > cutoff) logpdet += std::log(es.eigenvalues()[i]);

  double q = 0.0;
  const int sd = blk.sub_dim;
  for (int i = 0; i < blk.n_sub; ++i) {
    const auto seg = st.beta[fri].segment(i * sd, sd);
    q += seg.squaredNorm() / t1 + seg.dot(blk.K2 * seg) / t2;
  }
  const double want = 0.5 * logpdet - 0.5 * q;
  CHECK(log_smooth_prior(m, st, fri) == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("smoothing prior: doubly penalized association curve") {
  JointModelSpec sp = rich_spec();
  sp.alpha.g2 = G2Kind::pspline_time;
  sp.alpha.g2_n_basis = 5;
  Model m(sp, toy_data());
  ThetaState st = m.make_state();
  randomize(m, st, 29, 0.3);
  const int ab = m.alpha_block();
  const CoefBlock& blk = m.block(ab);
  REQUIRE(blk.n_var == 2);
  const double t1 = st.tau2[blk.slot1], t2 = st.tau2[blk.slot2];

  const Eigen::MatrixXd P = blk.K1e / t1 + blk.K2e / t2;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P, Eigen::EigenvaluesOnly);
  const double cutoff = 1e-10 * es.eigenvalues().maxCoeff();
  double logpdet = 0.0;
  int nzero = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()[i] > cutoff)
      logpdet += std::log(es.eigenvalues()[i]);
    else
      ++nzero;
  }
  CHECK(nzero == 2);  // null(K1) x null(K2) intersection
  const double q = st.beta[ab].dot(P * st.beta[ab]);
  CHECK(log_smooth_prior(m, st, ab) ==
        doctest::Approx(0.5 * logpdet - 0.5 * q).epsilon(1e-10));
}

TEST_CASE("log posterior is -infinity once an exponent overflows") {
  Model m(rich_spec(), toy_data());
  ThetaState st = m.make_state();
  CHECK(std::isfinite(log_posterior(m, st)));
  st.beta[0][0] = 800.0;
  m.refresh_after_block(st, 0);
  CHECK(log_posterior(m, st) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("penalized Hessian is negative definite near the prior mode") {
  Model m(rich_spec(), toy_data());
  ThetaState st = m.make_state();
  randomize(m, st, 31, 0.05);
  for (int b = 0; b < m.n_blocks(); ++b) {
    CAPTURE(m.block(b).name);
    BlockDerivs dv = score_hessian(m, st, b, true);
    CHECK(dv.hess.factorize_negated());
  }
}
