#include "flexjm/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "flexjm/errors.hpp"
#include "flexjm/quadrature.hpp"

namespace flexjm {

namespace {

constexpr double exp_cap = 700.0;  // exp() overflows just above 709

double guarded_exp(double x, bool& overflow) {
  if (x > exp_cap) {
    overflow = true;
    return std::exp(exp_cap);
  }
  return std::exp(x);
}

double numeric_rank(const Eigen::MatrixXd& K) {
  if (K.size() == 0 || K.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
  const double cut = 1e-10 * es.eigenvalues().cwiseAbs().maxCoeff();
  int r = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()[i] > cut) ++r;
  return r;
}

Eigen::VectorXd eigenvalues_of(const Eigen::MatrixXd& K) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

Eigen::MatrixXd kron_identity_right(const Eigen::MatrixXd& K, int m) {
  // K (x) I_m
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(K.rows() * m, K.cols() * m);
  for (Eigen::Index i = 0; i < K.rows(); ++i)
    for (Eigen::Index j = 0; j < K.cols(); ++j)
      if (K(i, j) != 0.0)
        for (int k = 0; k < m; ++k) out(i * m + k, j * m + k) = K(i, j);
  return out;
}

Eigen::MatrixXd kron_identity_left(int m, const Eigen::MatrixXd& K) {
  // I_m (x) K
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m * K.rows(), m * K.cols());
  for (int b = 0; b < m; ++b)
    out.block(b * K.rows(), b * K.cols(), K.rows(), K.cols()) = K;
  return out;
}

}  // namespace

const char* predictor_name(PredictorId p) {
  switch (p) {
    case PredictorId::lambda: return "lambda";
    case PredictorId::gamma: return "gamma";
    case PredictorId::alpha: return "alpha";
    case PredictorId::mu: return "mu";
    case PredictorId::sigma: return "sigma";
  }
  return "?";
}

Model::Model(JointModelSpec spec, Dataset data)
    : spec_(std::move(spec)), data_(std::move(data)) {
  data_.validate();
  validate_spec();
  build_quadrature();

  // Block order is the update order: lambda, gamma, alpha, mu, sigma.
  for (const auto& t : spec_.lambda)
    blocks_.push_back(build_term(t, PredictorId::lambda));
  for (const auto& t : spec_.gamma)
    blocks_.push_back(build_term(t, PredictorId::gamma));
  build_assoc();
  for (const auto& t : spec_.mu) blocks_.push_back(build_term(t, PredictorId::mu));
  for (const auto& t : spec_.sigma)
    blocks_.push_back(build_term(t, PredictorId::sigma));

  for (int b = 0; b < n_blocks(); ++b) {
    CoefBlock& blk = blocks_[b];
    pred_blocks_[static_cast<int>(blk.pred)].push_back(b);
    if (blk.n_var >= 1) {
      blk.slot1 = n_var_slots_++;
      var_names_.push_back(blk.name + (blk.n_var == 1 ? ".tau2" : ".tau2_1"));
    }
    if (blk.n_var == 2) {
      blk.slot2 = n_var_slots_++;
      var_names_.push_back(blk.name + ".tau2_2");
    }
  }
}

void Model::validate_spec() const {
  auto count_kind = [](const std::vector<TermSpec>& terms, TermKind k) {
    return std::count_if(terms.begin(), terms.end(),
                         [&](const TermSpec& t) { return t.kind == k; });
  };
  if (count_kind(spec_.lambda, TermKind::intercept) != 1)
    throw ConfigError("lambda needs exactly one intercept (the overall hazard level)");
  for (const auto& t : spec_.lambda)
    if (t.kind != TermKind::intercept && t.kind != TermKind::pspline_time)
      throw ConfigError("lambda admits only an intercept and time splines");
  for (const auto& t : spec_.gamma) {
    if (t.kind == TermKind::intercept)
      throw ConfigError(
          "gamma must not contain an intercept; the hazard level lives in lambda");
    if (t.kind != TermKind::linear_covariate && t.kind != TermKind::pspline_covariate)
      throw ConfigError("gamma terms must be time-constant covariate effects");
  }
  if (count_kind(spec_.mu, TermKind::intercept) != 1)
    throw ConfigError("mu needs exactly one intercept");
  if (count_kind(spec_.mu, TermKind::random_intercept) > 1 ||
      count_kind(spec_.mu, TermKind::functional_random_intercept) > 1)
    throw ConfigError("mu admits at most one random intercept and one functional random intercept");
  if (count_kind(spec_.sigma, TermKind::intercept) != 1)
    throw ConfigError("sigma needs exactly one intercept");
  for (const auto& t : spec_.sigma)
    if (t.kind == TermKind::random_intercept ||
        t.kind == TermKind::functional_random_intercept)
      throw ConfigError("random effects are not supported in sigma");
  if (spec_.quad_nodes < 2 || spec_.quad_nodes > 200)
    throw ConfigError("quadrature nodes must be in [2, 200]");
  if (!(spec_.vague_sd > 0.0)) throw ConfigError("vague prior sd must be positive");
  if (spec_.alpha.g2 == G2Kind::group_factor && spec_.alpha.n_levels < 2)
    throw ConfigError("group factor association needs at least two levels");
}

void Model::build_quadrature() {
  const int k = spec_.quad_nodes;
  const QuadratureRule rule = QuadratureRule::gauss_legendre(k);
  const int n = data_.n();
  quad_u_.resize(n * k);
  quad_w_.resize(n * k);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd u, w;
    rule.rescale(data_.time[i], u, w);
    quad_u_.segment(i * k, k) = u;
    quad_w_.segment(i * k, k) = w;
  }
}

CoefBlock Model::build_term(const TermSpec& term, PredictorId pred) {
  CoefBlock blk;
  blk.pred = pred;
  blk.kind = term.kind;
  const std::string pname = predictor_name(pred);
  const int n = data_.n();
  const int N = data_.n_obs();
  const int nqr = n * spec_.quad_nodes;
  const double maxT = data_.time.maxCoeff();

  // Which contexts this predictor is evaluated in.
  std::vector<Ctx> ctxs;
  switch (pred) {
    case PredictorId::lambda: ctxs = {ctx_evt, ctx_quad}; break;
    case PredictorId::gamma: ctxs = {ctx_evt}; break;
    case PredictorId::mu: ctxs = {ctx_long, ctx_evt, ctx_quad}; break;
    case PredictorId::sigma: ctxs = {ctx_long}; break;
    default: throw ConfigError("alpha terms are configured through the association spec");
  }
  auto rows_of = [&](Ctx c) { return c == ctx_long ? N : (c == ctx_evt ? n : nqr); };
  auto subj_of = [&](Ctx c, int r) {
    return c == ctx_long ? data_.subj[r] : (c == ctx_evt ? r : r / spec_.quad_nodes);
  };
  auto time_of = [&](Ctx c, int r) {
    return c == ctx_long ? data_.t[r] : (c == ctx_evt ? data_.time[r] : quad_u_[r]);
  };
  // The context whose rows define centering constraints.
  const Ctx home = (pred == PredictorId::mu || pred == PredictorId::sigma) ? ctx_long : ctx_evt;

  switch (term.kind) {
    case TermKind::intercept: {
      blk.name = pname + ".intercept";
      blk.dim = 1;
      blk.fixed_prec = 1.0 / (spec_.vague_sd * spec_.vague_sd);
      for (Ctx c : ctxs) blk.X[c] = Eigen::MatrixXd::Ones(rows_of(c), 1);
      break;
    }
    case TermKind::linear_covariate: {
      if (term.covariate.empty())
        throw ConfigError(pname + ": linear term needs a covariate name");
      const Eigen::VectorXd& col = data_.covariate(term.covariate);
      blk.name = pname + "." + term.covariate;
      blk.covariate = term.covariate;
      blk.dim = 1;
      blk.fixed_prec = 1.0 / (spec_.vague_sd * spec_.vague_sd);
      for (Ctx c : ctxs) {
        Eigen::MatrixXd X(rows_of(c), 1);
        for (int r = 0; r < rows_of(c); ++r) X(r, 0) = col[subj_of(c, r)];
        blk.X[c] = X;
      }
      break;
    }
    case TermKind::pspline_covariate: {
      if (term.covariate.empty())
        throw ConfigError(pname + ": pspline term needs a covariate name");
      const Eigen::VectorXd& col = data_.covariate(term.covariate);
      blk.name = pname + ".s(" + term.covariate + ")";
      blk.covariate = term.covariate;
      blk.basis = BasisSpec{col.minCoeff(), col.maxCoeff(), term.n_basis,
                            term.degree, term.diff_order};
      blk.basis.validate();
      blk.has_basis = true;
      if (rows_of(home) == 0)
        throw ConfigError(blk.name + ": no rows to anchor the centering constraint");
      Eigen::VectorXd xh(rows_of(home));
      for (int r = 0; r < rows_of(home); ++r) xh[r] = col[subj_of(home, r)];
      const Eigen::MatrixXd Bh = bspline_basis(xh, blk.basis, 0);
      const Eigen::MatrixXd K = difference_penalty(term.n_basis, term.diff_order);
      const CenteredTerm ct = sum_to_zero(Bh, K);
      blk.Z = ct.Z;
      blk.dim = static_cast<int>(ct.X.cols());
      blk.n_var = 1;
      blk.K1 = ct.K;
      blk.K1e = ct.K;
      blk.rank1 = numeric_rank(ct.K);
      blk.ha1 = term.hyper_a;
      blk.hb1 = term.hyper_b;
      for (Ctx c : ctxs) {
        if (c == home) {
          blk.X[c] = ct.X;
          continue;
        }
        Eigen::VectorXd xc(rows_of(c));
        for (int r = 0; r < rows_of(c); ++r) xc[r] = col[subj_of(c, r)];
        blk.X[c] = bspline_basis(xc, blk.basis, 0) * blk.Z;
      }
      break;
    }
    case TermKind::pspline_time: {
      blk.name = pname + ".s(time)";
      blk.basis = BasisSpec{0.0, maxT, term.n_basis, term.degree, term.diff_order};
      blk.basis.validate();
      blk.has_basis = true;
      if (rows_of(home) == 0)
        throw ConfigError(blk.name + ": no rows to anchor the centering constraint");
      Eigen::VectorXd th(rows_of(home));
      for (int r = 0; r < rows_of(home); ++r) th[r] = time_of(home, r);
      const Eigen::MatrixXd Bh = bspline_basis(th, blk.basis, 0);
      const Eigen::MatrixXd K = difference_penalty(term.n_basis, term.diff_order);
      const CenteredTerm ct = sum_to_zero(Bh, K);
      blk.Z = ct.Z;
      blk.dim = static_cast<int>(ct.X.cols());
      blk.n_var = 1;
      blk.K1 = ct.K;
      blk.K1e = ct.K;
      blk.rank1 = numeric_rank(ct.K);
      blk.ha1 = term.hyper_a;
      blk.hb1 = term.hyper_b;
      for (Ctx c : ctxs) {
        if (c == home) {
          blk.X[c] = ct.X;
          continue;
        }
        Eigen::VectorXd tc(rows_of(c));
        for (int r = 0; r < rows_of(c); ++r) tc[r] = time_of(c, r);
        blk.X[c] = bspline_basis(tc, blk.basis, 0) * blk.Z;
      }
      break;
    }
    case TermKind::random_intercept: {
      blk.name = pname + ".ri(id)";
      blk.subject_structured = true;
      blk.n_sub = n;
      blk.sub_dim = 1;
      blk.dim = n;
      for (Ctx c : ctxs) blk.C[c] = Eigen::MatrixXd::Ones(rows_of(c), 1);
      blk.n_var = 1;
      blk.K1 = Eigen::MatrixXd::Identity(1, 1);
      blk.rank1 = n;
      blk.ha1 = term.hyper_a;
      blk.hb1 = term.hyper_b;
      break;
    }
    case TermKind::functional_random_intercept: {
      blk.name = pname + ".fri(id,time)";
      blk.subject_structured = true;
      blk.basis = BasisSpec{0.0, maxT, term.n_basis, term.degree, term.diff_order};
      blk.basis.validate();
      blk.has_basis = true;
      if (N == 0)
        throw ConfigError(blk.name + ": no longitudinal rows to anchor the time-margin constraint");
      const Eigen::MatrixXd Bh = bspline_basis(data_.t, blk.basis, 0);
      const Eigen::MatrixXd Kt = difference_penalty(term.n_basis, term.diff_order);
      const CenteredTerm ct = sum_to_zero(Bh, Kt);
      blk.Z = ct.Z;
      blk.sub_dim = static_cast<int>(ct.Z.cols());
      blk.n_sub = n;
      blk.dim = n * blk.sub_dim;
      blk.C[ctx_long] = ct.X;
      for (Ctx c : ctxs) {
        if (c == ctx_long) continue;
        Eigen::VectorXd tc(rows_of(c));
        for (int r = 0; r < rows_of(c); ++r) tc[r] = time_of(c, r);
        blk.C[c] = bspline_basis(tc, blk.basis, 0) * blk.Z;
      }
      // Anisotropic prior, subject margin (identity) first, time margin second.
      blk.n_var = 2;
      blk.K1 = Eigen::MatrixXd::Identity(blk.sub_dim, blk.sub_dim);
      blk.K2 = ct.K;
      blk.rank1 = blk.dim;
      blk.rank2 = n * numeric_rank(ct.K);
      blk.eigA = Eigen::VectorXd::Ones(1);
      blk.eigB = eigenvalues_of(ct.K);
      blk.pdet_mult = n;
      blk.ha1 = blk.ha2 = term.hyper_a;
      blk.hb1 = blk.hb2 = term.hyper_b;
      break;
    }
  }
  return blk;
}

void Model::build_assoc() {
  const AssocSpec& a = spec_.alpha;
  const int n = data_.n();
  const int nqr = n * spec_.quad_nodes;
  AssocDesign& d = assoc_;
  d.g1 = a.g1;
  d.g2 = a.g2;

  if (a.g1 == G1Kind::pspline) {
    d.g1c = alpha_grid_constraint(data_.y, a.g1_n_basis, a.g1_degree,
                                  a.g1_diff_order, a.grid_size);
    d.p1 = a.g1_n_basis - 1;
  } else {
    d.p1 = 1;
  }

  switch (a.g2) {
    case G2Kind::constant: {
      d.p2 = 1;
      d.G2[ctx_evt] = Eigen::MatrixXd::Ones(n, 1);
      d.G2[ctx_quad] = Eigen::MatrixXd::Ones(nqr, 1);
      break;
    }
    case G2Kind::covariate: {
      if (a.covariate.empty())
        throw ConfigError("association: covariate interaction needs a covariate name");
      const Eigen::VectorXd& col = data_.covariate(a.covariate);
      d.p2 = 2;
      d.G2[ctx_evt] = Eigen::MatrixXd::Ones(n, 2);
      d.G2[ctx_evt].col(1) = col;
      d.G2[ctx_quad] = Eigen::MatrixXd::Ones(nqr, 2);
      for (int r = 0; r < nqr; ++r) d.G2[ctx_quad](r, 1) = col[r / spec_.quad_nodes];
      break;
    }
    case G2Kind::group_factor: {
      if (a.covariate.empty())
        throw ConfigError("association: group factor needs a covariate name");
      const Eigen::VectorXd& col = data_.covariate(a.covariate);
      const int G = a.n_levels;
      d.n_levels = G;
      d.level.resize(n);
      for (int i = 0; i < n; ++i) {
        const double v = col[i];
        if (v != std::floor(v) || v < 0 || v >= G)
          throw DataError("group factor '" + a.covariate + "': subject '" +
                          data_.ids[i] + "' has level " + std::to_string(v) +
                          ", expected an integer in [0, " + std::to_string(G - 1) + "]");
        d.level[i] = static_cast<int>(v);
      }
      d.p2 = G;
      if (a.g1 == G1Kind::identity) {
        // Reference-coded slopes: eta_mu * (b0 + sum_g 1[level=g] b_g).
        d.G2[ctx_evt] = Eigen::MatrixXd::Zero(n, G);
        for (int i = 0; i < n; ++i) {
          d.G2[ctx_evt](i, 0) = 1.0;
          if (d.level[i] > 0) d.G2[ctx_evt](i, d.level[i]) = 1.0;
        }
      } else {
        // One-hot level indicators carrying level-specific curves, plus one
        // unpenalized intercept per non-reference level.
        d.G2[ctx_evt] = Eigen::MatrixXd::Zero(n, G);
        for (int i = 0; i < n; ++i) d.G2[ctx_evt](i, d.level[i]) = 1.0;
        d.n_intercepts = G - 1;
      }
      d.G2[ctx_quad].resize(nqr, G);
      for (int r = 0; r < nqr; ++r)
        d.G2[ctx_quad].row(r) = d.G2[ctx_evt].row(r / spec_.quad_nodes);
      break;
    }
    case G2Kind::pspline_time: {
      const double maxT = data_.time.maxCoeff();
      BasisSpec tb{0.0, maxT, a.g2_n_basis, a.g2_degree, a.g2_diff_order};
      tb.validate();
      d.p2 = a.g2_n_basis;
      d.G2[ctx_evt] = bspline_basis(data_.time, tb, 0);
      d.G2[ctx_quad] = bspline_basis(quad_u_, tb, 0);
      break;
    }
  }

  CoefBlock blk;
  blk.pred = PredictorId::alpha;
  blk.is_alpha = true;
  blk.name = "alpha";
  blk.dim = d.dim();
  const double vp = 1.0 / (spec_.vague_sd * spec_.vague_sd);

  const int curve = d.p1 * d.p2;
  if (a.g1 == G1Kind::pspline) {
    // Difference penalty on the g1 margin, shared across g2 columns.
    blk.K1 = d.g1c.K;
    blk.K1e = Eigen::MatrixXd::Zero(blk.dim, blk.dim);
    blk.K1e.topLeftCorner(curve, curve) = kron_identity_right(d.g1c.K, d.p2);
    blk.rank1 = numeric_rank(d.g1c.K) * d.p2;
    blk.n_var = 1;
    blk.ha1 = a.hyper_a;
    blk.hb1 = a.hyper_b;
    if (a.g2 == G2Kind::pspline_time) {
      const Eigen::MatrixXd K2 = difference_penalty(a.g2_n_basis, a.g2_diff_order);
      blk.K2 = K2;
      blk.K2e = Eigen::MatrixXd::Zero(blk.dim, blk.dim);
      blk.K2e.topLeftCorner(curve, curve) = kron_identity_left(d.p1, K2);
      blk.rank2 = numeric_rank(K2) * d.p1;
      blk.n_var = 2;
      blk.eigA = eigenvalues_of(d.g1c.K);
      blk.eigB = eigenvalues_of(K2);
      blk.pdet_mult = 1.0;
      blk.ha2 = a.hyper_a;
      blk.hb2 = a.hyper_b;
    }
    if (d.n_intercepts > 0) {
      blk.extra_fixed_prec = Eigen::VectorXd::Zero(blk.dim);
      blk.extra_fixed_prec.tail(d.n_intercepts).setConstant(vp);
    }
  } else if (a.g2 == G2Kind::pspline_time) {
    // Linear in eta_mu with a smooth time-varying slope.
    const Eigen::MatrixXd K2 = difference_penalty(a.g2_n_basis, a.g2_diff_order);
    blk.K1 = K2;
    blk.K1e = K2;
    blk.rank1 = numeric_rank(K2);
    blk.n_var = 1;
    blk.ha1 = a.hyper_a;
    blk.hb1 = a.hyper_b;
  } else {
    blk.fixed_prec = vp;
  }
  alpha_block_ = static_cast<int>(blocks_.size());
  blocks_.push_back(std::move(blk));
}

ThetaState Model::make_state() const {
  ThetaState s;
  s.beta.resize(n_blocks());
  for (int b = 0; b < n_blocks(); ++b)
    s.beta[b] = Eigen::VectorXd::Zero(blocks_[b].dim);
  s.tau2.assign(n_var_slots_, 1.0);
  const int n = data_.n(), N = data_.n_obs(), nqr = n * spec_.quad_nodes;
  const int p1 = assoc_.p1;
  s.eta_mu_long.resize(N);
  s.eta_sig_long.resize(N);
  s.invR.resize(N);
  s.eta_mu_evt.resize(n);
  s.eta_lam_evt.resize(n);
  s.eta_gam.resize(n);
  s.eta_alpha_evt.resize(n);
  s.eta_mu_quad.resize(nqr);
  s.eta_lam_quad.resize(nqr);
  s.eta_alpha_quad.resize(nqr);
  s.g1_evt.resize(n, p1);
  s.g1d_evt.resize(n, p1);
  s.g1dd_evt.resize(n, p1);
  s.g1_quad.resize(nqr, p1);
  s.g1d_quad.resize(nqr, p1);
  s.g1dd_quad.resize(nqr, p1);
  s.w_evt.resize(n);
  s.v_evt.resize(n);
  s.w_quad.resize(nqr);
  s.v_quad.resize(nqr);
  s.psi_quad.resize(nqr);
  s.haz_inner.resize(n);
  s.cumhaz.resize(n);
  refresh_all(s);
  return s;
}

void Model::refresh_pred(ThetaState& s, PredictorId pred) const {
  const int nq = spec_.quad_nodes;
  auto acc = [&](Ctx c, Eigen::VectorXd& eta) {
    eta.setZero();
    for (int b : pred_blocks_[static_cast<int>(pred)]) {
      const CoefBlock& blk = blocks_[b];
      if (blk.is_alpha) continue;
      if (!blk.subject_structured) {
        eta.noalias() += blk.X[c] * s.beta[b];
      } else {
        const Eigen::MatrixXd& C = blk.C[c];
        const int sd = blk.sub_dim;
        for (int r = 0; r < C.rows(); ++r) {
          const int i = (c == ctx_long) ? data_.subj[r] : (c == ctx_evt ? r : r / nq);
          eta[r] += C.row(r).dot(s.beta[b].segment(i * sd, sd));
        }
      }
    }
  };
  switch (pred) {
    case PredictorId::lambda:
      acc(ctx_evt, s.eta_lam_evt);
      acc(ctx_quad, s.eta_lam_quad);
      break;
    case PredictorId::gamma:
      acc(ctx_evt, s.eta_gam);
      break;
    case PredictorId::mu:
      acc(ctx_long, s.eta_mu_long);
      acc(ctx_evt, s.eta_mu_evt);
      acc(ctx_quad, s.eta_mu_quad);
      break;
    case PredictorId::sigma:
      acc(ctx_long, s.eta_sig_long);
      break;
    case PredictorId::alpha:
      break;  // handled by refresh_assoc_eta
  }
}

void Model::g1_rows(double eta, double* g1, double* g1d, double* g1dd) const {
  if (assoc_.g1 == G1Kind::identity) {
    g1[0] = eta;
    g1d[0] = 1.0;
    g1dd[0] = 0.0;
    return;
  }
  const BasisSpec& bs = assoc_.g1c.basis;
  static thread_local std::vector<double> raw;
  raw.resize(bs.n_basis);
  BasisEval ev(bs);
  const Eigen::MatrixXd& Z = assoc_.g1c.Z;
  const int p1 = assoc_.p1;
  for (int d = 0; d < 3; ++d) {
    ev.row(eta, d, raw.data());
    Eigen::Map<const Eigen::RowVectorXd> r(raw.data(), bs.n_basis);
    Eigen::Map<Eigen::RowVectorXd> out(d == 0 ? g1 : (d == 1 ? g1d : g1dd), p1);
    out = r * Z;
  }
}

void Model::refresh_g1(ThetaState& s) const {
  if (assoc_.g1 == G1Kind::identity) {
    s.g1_evt.col(0) = s.eta_mu_evt;
    s.g1d_evt.setOnes();
    s.g1dd_evt.setZero();
    s.g1_quad.col(0) = s.eta_mu_quad;
    s.g1d_quad.setOnes();
    s.g1dd_quad.setZero();
    return;
  }
  const BasisSpec& bs = assoc_.g1c.basis;
  BasisEval ev(bs);
  const Eigen::MatrixXd& Z = assoc_.g1c.Z;
  std::vector<double> raw(bs.n_basis);
  auto fill = [&](const Eigen::VectorXd& eta, Eigen::MatrixXd& m0,
                  Eigen::MatrixXd& m1, Eigen::MatrixXd& m2) {
    for (int r = 0; r < eta.size(); ++r) {
      for (int d = 0; d < 3; ++d) {
        ev.row(eta[r], d, raw.data());
        Eigen::Map<const Eigen::RowVectorXd> rv(raw.data(), bs.n_basis);
        (d == 0 ? m0 : d == 1 ? m1 : m2).row(r) = rv * Z;
      }
    }
  };
  fill(s.eta_mu_evt, s.g1_evt, s.g1d_evt, s.g1dd_evt);
  fill(s.eta_mu_quad, s.g1_quad, s.g1d_quad, s.g1dd_quad);
}

void Model::refresh_assoc_eta(ThetaState& s) const {
  const AssocDesign& d = assoc_;
  const Eigen::VectorXd& beta = s.beta[alpha_block_];
  const int p1 = d.p1, p2 = d.p2, nq = spec_.quad_nodes;
  auto fill = [&](Ctx c, const Eigen::MatrixXd& g1, const Eigen::MatrixXd& g1d,
                  const Eigen::MatrixXd& g1dd, Eigen::VectorXd& eta,
                  Eigen::VectorXd& w, Eigen::VectorXd& v) {
    const Eigen::MatrixXd& G2 = d.G2[c];
    for (int r = 0; r < g1.rows(); ++r) {
      double e = 0, dw = 0, dv = 0;
      for (int j1 = 0; j1 < p1; ++j1) {
        double b2 = 0;
        for (int j2 = 0; j2 < p2; ++j2) b2 += G2(r, j2) * beta[j1 * p2 + j2];
        e += g1(r, j1) * b2;
        dw += g1d(r, j1) * b2;
        dv += g1dd(r, j1) * b2;
      }
      if (d.n_intercepts > 0) {
        const int i = (c == ctx_evt) ? r : r / nq;
        const int lev = d.level[i];
        if (lev > 0) e += beta[p1 * p2 + lev - 1];
      }
      eta[r] = e;
      w[r] = dw;
      v[r] = dv;
    }
  };
  fill(ctx_evt, s.g1_evt, s.g1d_evt, s.g1dd_evt, s.eta_alpha_evt, s.w_evt, s.v_evt);
  fill(ctx_quad, s.g1_quad, s.g1d_quad, s.g1dd_quad, s.eta_alpha_quad, s.w_quad,
       s.v_quad);
}

void Model::refresh_hazard(ThetaState& s) const {
  const int n = data_.n(), nq = spec_.quad_nodes;
  bool ovf = false;
  for (int r = 0; r < n * nq; ++r)
    s.psi_quad[r] = guarded_exp(s.eta_lam_quad[r] + s.eta_alpha_quad[r], ovf);
  for (int i = 0; i < n; ++i) {
    s.haz_inner[i] =
        quad_w_.segment(i * nq, nq).dot(s.psi_quad.segment(i * nq, nq));
    s.cumhaz[i] = guarded_exp(s.eta_gam[i], ovf) * s.haz_inner[i];
  }
  s.overflow = ovf;
}

void Model::refresh_sigma(ThetaState& s) const {
  bool ovf = s.overflow;
  for (int j = 0; j < data_.n_obs(); ++j)
    s.invR[j] = guarded_exp(-2.0 * s.eta_sig_long[j], ovf);
  s.overflow = ovf;
}

void Model::refresh_all(ThetaState& s) const {
  s.overflow = false;
  refresh_pred(s, PredictorId::lambda);
  refresh_pred(s, PredictorId::gamma);
  refresh_pred(s, PredictorId::mu);
  refresh_pred(s, PredictorId::sigma);
  refresh_g1(s);
  refresh_assoc_eta(s);
  refresh_hazard(s);
  refresh_sigma(s);
}

void Model::refresh_after_block(ThetaState& s, int b) const {
  s.overflow = false;
  switch (blocks_[b].pred) {
    case PredictorId::lambda:
      refresh_pred(s, PredictorId::lambda);
      refresh_hazard(s);
      break;
    case PredictorId::gamma: {
      refresh_pred(s, PredictorId::gamma);
      bool ovf = false;
      for (int i = 0; i < data_.n(); ++i)
        s.cumhaz[i] = guarded_exp(s.eta_gam[i], ovf) * s.haz_inner[i];
      s.overflow = ovf;
      break;
    }
    case PredictorId::alpha:
      refresh_assoc_eta(s);
      refresh_hazard(s);
      break;
    case PredictorId::mu:
      refresh_pred(s, PredictorId::mu);
      refresh_g1(s);
      refresh_assoc_eta(s);
      refresh_hazard(s);
      break;
    case PredictorId::sigma:
      refresh_pred(s, PredictorId::sigma);
      refresh_sigma(s);
      break;
  }
  // A sigma refresh does not touch the hazard caches, and vice versa; the
  // overflow flag only reports the caches just rebuilt. Re-check the other
  // side so the flag stays global.
  if (blocks_[b].pred == PredictorId::sigma) {
    if (!s.overflow && s.psi_quad.size() > 0 && !s.psi_quad.allFinite())
      s.overflow = true;
  }
}

namespace {

void touched_slices(const Model& m, ThetaState& s, PredictorId pred,
                    std::vector<Eigen::VectorXd*>& vecs,
                    std::vector<Eigen::MatrixXd*>& mats) {
  switch (pred) {
    case PredictorId::lambda:
      vecs = {&s.eta_lam_evt, &s.eta_lam_quad, &s.psi_quad, &s.haz_inner, &s.cumhaz};
      break;
    case PredictorId::gamma:
      vecs = {&s.eta_gam, &s.cumhaz};
      break;
    case PredictorId::alpha:
      vecs = {&s.eta_alpha_evt, &s.eta_alpha_quad, &s.w_evt, &s.v_evt,
              &s.w_quad, &s.v_quad, &s.psi_quad, &s.haz_inner, &s.cumhaz};
      break;
    case PredictorId::mu:
      vecs = {&s.eta_mu_long, &s.eta_mu_evt, &s.eta_mu_quad, &s.eta_alpha_evt,
              &s.eta_alpha_quad, &s.w_evt, &s.v_evt, &s.w_quad, &s.v_quad,
              &s.psi_quad, &s.haz_inner, &s.cumhaz};
      mats = {&s.g1_evt, &s.g1d_evt, &s.g1dd_evt,
              &s.g1_quad, &s.g1d_quad, &s.g1dd_quad};
      break;
    case PredictorId::sigma:
      vecs = {&s.eta_sig_long, &s.invR};
      break;
  }
  (void)m;
}

}  // namespace

StateCheckpoint Model::checkpoint(const ThetaState& s, int b) const {
  StateCheckpoint cp;
  cp.block = b;
  cp.beta = s.beta[b];
  cp.overflow = s.overflow;
  std::vector<Eigen::VectorXd*> vecs;
  std::vector<Eigen::MatrixXd*> mats;
  touched_slices(*this, const_cast<ThetaState&>(s), blocks_[b].pred, vecs, mats);
  for (auto* v : vecs) cp.vecs.push_back(*v);
  for (auto* m : mats) cp.mats.push_back(*m);
  return cp;
}

void Model::restore(ThetaState& s, const StateCheckpoint& cp) const {
  s.beta[cp.block] = cp.beta;
  s.overflow = cp.overflow;
  std::vector<Eigen::VectorXd*> vecs;
  std::vector<Eigen::MatrixXd*> mats;
  touched_slices(*this, s, blocks_[cp.block].pred, vecs, mats);
  for (std::size_t i = 0; i < vecs.size(); ++i) *vecs[i] = cp.vecs[i];
  for (std::size_t i = 0; i < mats.size(); ++i) *mats[i] = cp.mats[i];
}

Eigen::MatrixXd Model::term_design_at(int b, const Eigen::VectorXd& x) const {
  const CoefBlock& blk = blocks_[b];
  if (!blk.has_basis)
    throw ConfigError("block '" + blk.name + "' has no curve to evaluate");
  const Eigen::MatrixXd B = bspline_basis(x, blk.basis, 0);
  return blk.Z.size() > 0 ? Eigen::MatrixXd(B * blk.Z) : B;
}

double Model::eval_predictor(const ThetaState& s, PredictorId pred,
                             int subject, double t) const {
  double total = 0.0;
  Eigen::VectorXd one(1);
  for (int b : pred_blocks(pred)) {
    const CoefBlock& blk = blocks_[b];
    const Eigen::VectorXd& beta = s.beta[b];
    switch (blk.kind) {
      case TermKind::intercept:
        total += beta[0];
        break;
      case TermKind::linear_covariate:
        total += data_.covariate(blk.covariate)[subject] * beta[0];
        break;
      case TermKind::pspline_time:
        one[0] = t;
        total += (term_design_at(b, one) * beta)(0);
        break;
      case TermKind::pspline_covariate:
        one[0] = data_.covariate(blk.covariate)[subject];
        total += (term_design_at(b, one) * beta)(0);
        break;
      case TermKind::random_intercept:
        total += beta[subject];
        break;
      case TermKind::functional_random_intercept: {
        Eigen::RowVectorXd brow(blk.basis.n_basis);
        BasisEval be(blk.basis);
        be.row(t, 0, brow.data());
        total += (brow * blk.Z).dot(
            beta.segment(subject * blk.sub_dim, blk.sub_dim));
        break;
      }
    }
  }
  return total;
}

Eigen::MatrixXd Model::assoc_design_at(const Eigen::VectorXd& eta,
                                       const Eigen::VectorXd& t,
                                       const Eigen::VectorXi& level,
                                       int deriv) const {
  const AssocDesign& d = assoc_;
  const Eigen::Index m = eta.size();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, d.dim());
  std::vector<double> g1(d.p1), g1d(d.p1), g1dd(d.p1);
  for (Eigen::Index r = 0; r < m; ++r) {
    g1_rows(eta[r], g1.data(), g1d.data(), g1dd.data());
    const double* g = deriv == 0 ? g1.data() : (deriv == 1 ? g1d.data() : g1dd.data());
    Eigen::RowVectorXd g2 = Eigen::RowVectorXd::Ones(d.p2);
    switch (d.g2) {
      case G2Kind::constant:
        break;
      case G2Kind::covariate:
        g2[1] = t[r];  // the interaction covariate value
        break;
      case G2Kind::group_factor:
        g2.setZero();
        if (d.n_intercepts > 0) {
          g2[level[r]] = 1.0;
        } else {
          g2[0] = 1.0;
          if (level[r] > 0) g2[level[r]] = 1.0;
        }
        break;
      case G2Kind::pspline_time: {
        BasisSpec tb{0.0, data_.time.maxCoeff(), spec_.alpha.g2_n_basis,
                     spec_.alpha.g2_degree, spec_.alpha.g2_diff_order};
        Eigen::VectorXd one(1);
        one << t[r];
        g2 = bspline_basis(one, tb, 0).row(0);
        break;
      }
    }
    for (int j1 = 0; j1 < d.p1; ++j1)
      for (int j2 = 0; j2 < d.p2; ++j2) out(r, j1 * d.p2 + j2) = g[j1] * g2[j2];
    if (deriv == 0 && d.n_intercepts > 0 && level[r] > 0)
      out(r, d.p1 * d.p2 + level[r] - 1) = 1.0;
  }
  return out;
}

}  // namespace flexjm
