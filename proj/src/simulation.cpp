#include "flexjm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "flexjm/errors.hpp"
#include "flexjm/quadrature.hpp"
#include "flexjm/stats.hpp"

namespace flexjm {

namespace {

// Generator smoothing variances of the per-subject trajectory coefficients:
// subject margin variance 1 (identity penalty), time margin variance 0.2
// (second-order difference penalty), combined as a Kronecker sum. With the
// identity on the subject margin the joint precision factorizes per subject.
constexpr double fri_tau2_subject = 1.0;
constexpr double fri_tau2_time = 0.2;

Eigen::MatrixXd fri_subject_precision(const BasisSpec& basis) {
  const int p = basis.n_basis;
  return Eigen::MatrixXd::Identity(p, p) / fri_tau2_subject +
         difference_penalty(p, basis.diff_order) / fri_tau2_time;
}

}  // namespace

double SimTruth::eta_mu(int i, double t) const {
  Eigen::RowVectorXd row(fri_basis.n_basis);
  BasisEval be(fri_basis);
  be.row(t, 0, row.data());
  return f_time(t) + r[i] + row.dot(fri_beta.row(i)) + 0.5 +
         0.6 * std::sin(x2[i]);
}

double SimTruth::assoc(int i, double eta) const {
  return true_association(setting, eta, group[i]);
}

double SimTruth::assoc_deriv(int i, double eta) const {
  return true_association_deriv(setting, eta, group[i]);
}

double SimTruth::log_hazard(int i, double t) const {
  return eta_lambda(t) + eta_gamma(i) + assoc(i, eta_mu(i, t));
}

double SimTruth::cumulative_hazard(int i, double t) const {
  // Composite Gauss-Legendre accumulation in panels; the integrand is smooth
  // (the trajectory basis has no interior knots).
  static const QuadratureRule rule = QuadratureRule::gauss_legendre(15);
  const double panel = 5.0;
  double total = 0.0;
  double lo = 0.0;
  while (lo < t) {
    const double hi = std::min(lo + panel, t);
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    for (int q = 0; q < rule.nodes.size(); ++q)
      total += half * rule.weights[q] * hazard(i, mid + half * rule.nodes[q]);
    lo = hi;
  }
  return total;
}

double true_association(int setting, double eta, int group) {
  switch (setting) {
    case 1:
      return eta;
    case 2:
      return -0.1 * (eta + 3.0) * (eta + 3.0) + eta + 1.8;
    case 3:
      return group == 1 ? -0.1 * (eta + 3.0) * (eta + 3.0) + eta + 1.8
                        : 0.1 * (eta - 3.0) * (eta - 3.0) + 0.75 * eta - 0.8;
    default:
      throw ConfigError("unknown simulation setting " + std::to_string(setting));
  }
}

double true_association_deriv(int setting, double eta, int group) {
  switch (setting) {
    case 1:
      return 1.0;
    case 2:
      return -0.2 * (eta + 3.0) + 1.0;
    case 3:
      return group == 1 ? -0.2 * (eta + 3.0) + 1.0 : 0.2 * (eta - 3.0) + 0.75;
    default:
      throw ConfigError("unknown simulation setting " + std::to_string(setting));
  }
}

double invert_survival(const std::function<double(double)>& hazard, double u,
                       double t_max, double tol) {
  const double target = -std::log(u);
  if (target <= 0.0) return 0.0;

  static const QuadratureRule rule = QuadratureRule::gauss_legendre(15);
  auto integrate = [&](double lo, double hi) {
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    double s = 0.0;
    for (int q = 0; q < rule.nodes.size(); ++q)
      s += half * rule.weights[q] * hazard(mid + half * rule.nodes[q]);
    return s;
  };

  // Accumulate the integrated hazard over panels until the target is
  // bracketed, then bisect inside the bracketing panel.
  const double panel = 5.0;
  double lo = 0.0, cum_lo = 0.0;
  while (lo < t_max) {
    const double hi = std::min(lo + panel, t_max);
    const double cum_hi = cum_lo + integrate(lo, hi);
    if (cum_hi >= target) {
      double a = lo, b = hi;
      while (b - a > tol) {
        const double m = 0.5 * (a + b);
        if (cum_lo + integrate(lo, m) >= target)
          b = m;
        else
          a = m;
      }
      return 0.5 * (a + b);
    }
    lo = hi;
    cum_lo = cum_hi;
  }
  return t_max;  // integrated hazard never reaches the target
}

SimOutput simulate_dataset(const SimConfig& cfg) {
  if (cfg.setting < 1 || cfg.setting > 3)
    throw ConfigError("simulation setting must be 1, 2, or 3");
  if (cfg.n < 1) throw ConfigError("simulation needs at least one subject");
  if (!(cfg.keep_fraction > 0.0) || cfg.keep_fraction > 1.0)
    throw ConfigError("keep fraction must be in (0, 1]");
  if (!(cfg.noise_sd > 0.0)) throw ConfigError("noise sd must be positive");
  if (!(cfg.t_max > 0.0)) throw ConfigError("follow-up horizon must be positive");

  Rng rng(cfg.seed);
  SimOutput out;
  SimTruth& tr = out.truth;
  tr.setting = cfg.setting;
  tr.noise_sd = cfg.noise_sd;
  tr.t_max = cfg.t_max;
  tr.fri_basis = BasisSpec{0.0, cfg.t_max, 4, 3, 2};

  const int n = cfg.n;
  tr.x1.resize(n);
  tr.x2.resize(n);
  tr.group = Eigen::VectorXi::Zero(n);
  tr.r.resize(n);
  tr.fri_beta.resize(n, tr.fri_basis.n_basis);

  // Per-subject coefficient draws from the Kronecker-sum prior. The subject
  // margin is an identity penalty, so one Cholesky factor serves all
  // subjects. A singular combination (possible for other margins) falls back
  // to a ridged draw recentered to a zero-mean curve.
  Eigen::MatrixXd Q = fri_subject_precision(tr.fri_basis);
  Eigen::LLT<Eigen::MatrixXd> llt(Q);
  bool recenter = false;
  if (llt.info() != Eigen::Success) {
    Q.diagonal().array() += 1e-8 * Q.diagonal().maxCoeff();
    llt.compute(Q);
    recenter = true;
    if (llt.info() != Eigen::Success)
      throw NumericalError("trajectory prior precision not factorizable");
  }
  const Eigen::VectorXd grid_colmeans = [&] {
    Eigen::VectorXd t(static_cast<int>(cfg.t_max));
    for (int k = 0; k < t.size(); ++k) t[k] = k + 1.0;
    return Eigen::VectorXd(bspline_basis(t, tr.fri_basis).colwise().mean());
  }();

  out.data.time.resize(n);
  out.data.event.resize(n);
  out.latent_event_time.resize(n);

  for (int i = 0; i < n; ++i) {
    out.data.ids.push_back("s" + std::to_string(i + 1));
    tr.x1[i] = rng.uniform(-3.0, 3.0);
    tr.x2[i] = rng.uniform(-3.0, 3.0);
    if (cfg.setting == 3) tr.group[i] = rng.uniform01() < 0.5 ? 0 : 1;
    tr.r[i] = std::sqrt(cfg.ri_var) * rng.normal();
    Eigen::VectorXd z(tr.fri_basis.n_basis);
    for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = rng.normal();
    Eigen::VectorXd beta =
        llt.matrixU().solve(z);  // U^-1 z has covariance Q^-1
    if (recenter) beta.array() -= grid_colmeans.dot(beta);
    tr.fri_beta.row(i) = beta;

    const double u = rng.uniform01();
    const double latent = invert_survival(
        [&](double t) { return tr.hazard(i, t); }, u, cfg.t_max, 1e-8);
    out.latent_event_time[i] = latent;
    double T = latent;
    double delta = latent < cfg.t_max ? 1.0 : 0.0;
    if (cfg.uniform_censoring) {
      const double c = rng.uniform(0.0, 1.5 * cfg.t_max);
      if (c < T) {
        T = c;
        delta = 0.0;
      }
    }
    out.data.time[i] = std::max(T, 1e-9);
    out.data.event[i] = delta;
  }
  out.data.covars["x1"] = tr.x1;
  out.data.covars["x2"] = tr.x2;
  if (cfg.setting == 3) {
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) g[i] = tr.group[i];
    out.data.covars["g"] = g;
  }

  // Marker grid rows before the event, thinned by deleting an exact share of
  // the pooled measurements.
  std::vector<std::pair<int, double>> rows;
  for (int i = 0; i < n; ++i)
    for (double t = 1.0; t <= cfg.t_max && t <= out.data.time[i]; t += 1.0)
      rows.emplace_back(i, t);
  const int total = static_cast<int>(rows.size());
  const int keep = std::min(
      total, static_cast<int>(std::lround(cfg.keep_fraction * total)));
  std::vector<int> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  for (int j = 0; j < keep; ++j)
    std::swap(idx[j], idx[j + static_cast<int>(rng.uniform_int(
                                  static_cast<uint64_t>(total - j)))]);
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());

  out.data.subj.resize(keep);
  out.data.t.resize(keep);
  out.data.y.resize(keep);
  std::vector<int> per_subject(n, 0);
  for (int j = 0; j < keep; ++j) {
    const auto& [i, t] = rows[idx[j]];
    out.data.subj[j] = i;
    out.data.t[j] = t;
    out.data.y[j] = tr.eta_mu(i, t) +
                    (cfg.add_noise ? cfg.noise_sd * rng.normal() : 0.0);
    ++per_subject[i];
  }
  out.subjects_without_obs =
      static_cast<int>(std::count(per_subject.begin(), per_subject.end(), 0));
  out.data.validate();
  return out;
}

JointModelSpec setting_fit_spec(int setting) {
  if (setting < 1 || setting > 3)
    throw ConfigError("unknown simulation setting " + std::to_string(setting));
  JointModelSpec s;
  s.lambda = {TermSpec{TermKind::intercept, "", 6, 3, 2, 0.001, 0.001},
              TermSpec{TermKind::pspline_time, "", 10, 3, 2, 0.001, 0.001}};
  s.gamma = {TermSpec{TermKind::linear_covariate, "x1", 6, 3, 2, 0.001, 0.001}};
  s.mu = {TermSpec{TermKind::intercept, "", 6, 3, 2, 0.001, 0.001},
          TermSpec{TermKind::pspline_time, "", 5, 3, 2, 0.001, 0.001},
          TermSpec{TermKind::pspline_covariate, "x2", 8, 3, 2, 0.001, 0.001},
          TermSpec{TermKind::random_intercept, "", 6, 3, 2, 0.001, 0.001},
          TermSpec{TermKind::functional_random_intercept, "", 5, 3, 2, 0.001,
                   0.001}};
  s.sigma = {TermSpec{TermKind::intercept, "", 6, 3, 2, 0.001, 0.001}};
  s.alpha.g1 = G1Kind::pspline;
  s.alpha.g1_n_basis = 6;  // 5 basis functions after the grid constraint
  if (setting == 3) {
    s.alpha.g2 = G2Kind::group_factor;
    s.alpha.covariate = "g";
    s.alpha.n_levels = 2;
  }
  s.quad_nodes = 7;
  return s;
}

EvalDesign make_eval_design(const SimOutput& sim) {
  EvalDesign d;
  const int nt = static_cast<int>(sim.truth.t_max);
  d.t_grid.resize(nt);
  for (int k = 0; k < nt; ++k) d.t_grid[k] = k + 1.0;
  const int coarse = nt / 10;
  d.t_coarse.resize(coarse);
  for (int k = 0; k < coarse; ++k) d.t_coarse[k] = 10.0 * (k + 1);
  d.eta_grid.resize(120);
  for (int k = 0; k < 120; ++k) d.eta_grid[k] = -0.5 + 2.5 * k / 119.0;
  const int n = sim.data.n();
  d.eta_mu_event.resize(n);
  for (int i = 0; i < n; ++i)
    d.eta_mu_event[i] = sim.truth.eta_mu(i, sim.data.time[i]);
  d.n_levels = sim.truth.setting == 3 ? 2 : 1;
  return d;
}

DrawEval eval_truth(const SimOutput& sim, const EvalDesign& design) {
  const SimTruth& tr = sim.truth;
  const Dataset& data = sim.data;
  const int n = data.n(), N = data.n_obs();
  DrawEval e;
  e.mu_obs.resize(N);
  for (int r = 0; r < N; ++r) e.mu_obs[r] = tr.eta_mu(data.subj[r], data.t[r]);
  e.sigma_obs = Eigen::VectorXd::Constant(N, tr.eta_sigma());
  e.mu_time.resize(n, design.t_coarse.size());
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < design.t_coarse.size(); ++k)
      e.mu_time(i, k) = tr.eta_mu(i, design.t_coarse[k]);
  e.gamma_event.resize(n);
  e.lambda_event.resize(n);
  e.alpha_event.resize(n);
  double slope = 0.0;
  for (int i = 0; i < n; ++i) {
    e.gamma_event[i] = tr.eta_gamma(i);
    e.lambda_event[i] = tr.eta_lambda(data.time[i]);
    e.alpha_event[i] = tr.assoc(i, design.eta_mu_event[i]);
    slope += tr.assoc_deriv(i, design.eta_mu_event[i]);
  }
  e.avg_slope = slope / n;
  e.lambda_grid.resize(design.t_grid.size());
  for (int k = 0; k < design.t_grid.size(); ++k)
    e.lambda_grid[k] = tr.eta_lambda(design.t_grid[k]);
  e.alpha_grid.resize(design.n_levels, design.eta_grid.size());
  for (int g = 0; g < design.n_levels; ++g)
    for (int k = 0; k < design.eta_grid.size(); ++k)
      e.alpha_grid(g, k) = true_association(tr.setting, design.eta_grid[k], g);
  return e;
}

DrawEval eval_state(const Model& m, const ThetaState& s,
                    const EvalDesign& design) {
  const Dataset& data = m.data();
  const int n = m.n();
  DrawEval e;
  e.mu_obs = s.eta_mu_long;
  e.sigma_obs = s.eta_sig_long;
  e.gamma_event = s.eta_gam;
  e.lambda_event = s.eta_lam_evt;
  e.mu_time.resize(n, design.t_coarse.size());
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < design.t_coarse.size(); ++k)
      e.mu_time(i, k) =
          m.eval_predictor(s, PredictorId::mu, i, design.t_coarse[k]);
  e.lambda_grid.resize(design.t_grid.size());
  for (int k = 0; k < design.t_grid.size(); ++k)
    e.lambda_grid[k] =
        m.eval_predictor(s, PredictorId::lambda, 0, design.t_grid[k]);

  const Eigen::VectorXd& beta_a = s.beta[m.alpha_block()];
  const Eigen::VectorXi level = m.assoc().n_levels > 0
                                    ? m.assoc().level
                                    : Eigen::VectorXi::Zero(n);
  e.alpha_event =
      m.assoc_design_at(design.eta_mu_event, data.time, level, 0) * beta_a;
  // Slope of the fitted association at the fitted marker values.
  e.avg_slope =
      (m.assoc_design_at(s.eta_mu_evt, data.time, level, 1) * beta_a).mean();

  e.alpha_grid.resize(design.n_levels, design.eta_grid.size());
  const Eigen::VectorXd t0 = Eigen::VectorXd::Zero(design.eta_grid.size());
  for (int g = 0; g < design.n_levels; ++g) {
    const Eigen::VectorXi lev =
        Eigen::VectorXi::Constant(design.eta_grid.size(), g);
    e.alpha_grid.row(g) =
        (m.assoc_design_at(design.eta_grid, t0, lev, 0) * beta_a).transpose();
  }
  return e;
}

std::vector<DrawEval> eval_chain(const Model& m, const FitResult& fit,
                                 const EvalDesign& design, int stride) {
  if (stride < 1) stride = 1;
  std::vector<DrawEval> evals;
  ThetaState s = m.make_state();
  const int kept = static_cast<int>(fit.logpost_draws.size());
  for (int k = 0; k < kept; k += stride) {
    for (int b = 0; b < m.n_blocks(); ++b) s.beta[b] = fit.beta_draws[b].row(k);
    m.refresh_all(s);
    evals.push_back(eval_state(m, s, design));
  }
  return evals;
}

namespace {

// Removes the constant the model cannot identify between the baseline
// log-hazard and the association: center the log-hazard over the time grid
// and the reference association curve over the marker grid, applying the
// same shifts to the event-time evaluations and the remaining levels.
void align_draw(DrawEval& e) {
  const double c_lam = e.lambda_grid.mean();
  e.lambda_grid.array() -= c_lam;
  e.lambda_event.array() -= c_lam;
  const double c_alpha = e.alpha_grid.row(0).mean();
  e.alpha_grid.array() -= c_alpha;
  e.alpha_event.array() -= c_alpha;
}

struct Accumulator {
  // points x draws matrices per predictor, filled draw by draw
  Eigen::MatrixXd vals;
  Eigen::VectorXd truth;

  void init(const Eigen::VectorXd& tr, int n_draws) {
    truth = tr;
    vals.resize(tr.size(), n_draws);
  }
  void set(int d, const Eigen::VectorXd& v) { vals.col(d) = v; }

  PredMetrics metrics() const {
    PredMetrics pm;
    const Eigen::VectorXd est = vals.rowwise().mean();
    pm.mse = (est - truth).squaredNorm() / truth.size();
    pm.bias = (est - truth).mean();
    int covered = 0;
    Eigen::VectorXd row(vals.cols());
    for (Eigen::Index p = 0; p < truth.size(); ++p) {
      row = vals.row(p);
      std::sort(row.data(), row.data() + row.size());
      const double lo = quantile_type7(row, 0.025);
      const double hi = quantile_type7(row, 0.975);
      if (truth[p] >= lo && truth[p] <= hi) ++covered;
    }
    pm.coverage = static_cast<double>(covered) / truth.size();
    return pm;
  }

  Eigen::VectorXd pointwise_mse() const {
    const Eigen::VectorXd est = vals.rowwise().mean();
    return (est - truth).array().square();
  }
};

Eigen::VectorXd flatten(const Eigen::MatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

}  // namespace

SimMetrics metrics_from_draws(const DrawEval& truth,
                              const std::vector<DrawEval>& draws) {
  if (draws.empty()) throw NumericalError("error metrics need at least one draw");
  const int D = static_cast<int>(draws.size());

  DrawEval tr = truth;
  align_draw(tr);

  Accumulator mu, sig, gam, lam_e, lam_g, alp_e, alp_g, mu_t;
  mu.init(tr.mu_obs, D);
  sig.init(tr.sigma_obs, D);
  gam.init(tr.gamma_event, D);
  lam_e.init(tr.lambda_event, D);
  lam_g.init(tr.lambda_grid, D);
  alp_e.init(tr.alpha_event, D);
  alp_g.init(flatten(tr.alpha_grid), D);
  mu_t.init(flatten(tr.mu_time), D);
  Eigen::VectorXd slopes(D);

  for (int d = 0; d < D; ++d) {
    DrawEval e = draws[d];
    align_draw(e);
    mu.set(d, e.mu_obs);
    sig.set(d, e.sigma_obs);
    gam.set(d, e.gamma_event);
    lam_e.set(d, e.lambda_event);
    lam_g.set(d, e.lambda_grid);
    alp_e.set(d, e.alpha_event);
    alp_g.set(d, flatten(e.alpha_grid));
    mu_t.set(d, flatten(e.mu_time));
    slopes[d] = e.avg_slope;
  }

  SimMetrics sm;
  sm.mu_obs = mu.metrics();
  sm.sigma_obs = sig.metrics();
  sm.gamma_event = gam.metrics();
  sm.lambda_event = lam_e.metrics();
  sm.lambda_grid = lam_g.metrics();
  sm.alpha_event = alp_e.metrics();
  sm.alpha_grid = alp_g.metrics();

  sm.mse_lambda_time = lam_g.pointwise_mse();

  // Per-point curves: average the flattened layouts back onto their grids.
  const int n_levels = static_cast<int>(truth.alpha_grid.rows());
  const int n_eta = static_cast<int>(truth.alpha_grid.cols());
  const Eigen::VectorXd alpha_pw = alp_g.pointwise_mse();
  sm.mse_alpha_grid = Eigen::VectorXd::Zero(n_eta);
  for (int g = 0; g < n_levels; ++g)
    for (int k = 0; k < n_eta; ++k)
      sm.mse_alpha_grid[k] += alpha_pw[g + k * n_levels] / n_levels;

  const int n = static_cast<int>(truth.mu_time.rows());
  const int n_tc = static_cast<int>(truth.mu_time.cols());
  const Eigen::VectorXd mu_pw = mu_t.pointwise_mse();
  sm.mse_mu_time = Eigen::VectorXd::Zero(n_tc);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n_tc; ++k) sm.mse_mu_time[k] += mu_pw[i + k * n] / n;

  sm.avg_slope = slopes.mean();
  Eigen::VectorXd sorted = slopes;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  sm.slope_q025 = quantile_type7(sorted, 0.025);
  sm.slope_q975 = quantile_type7(sorted, 0.975);
  return sm;
}

void write_truth(const SimTruth& truth, const std::string& path,
                 const std::string& stamp) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.precision(17);
  if (!stamp.empty()) out << "# " << stamp << "\n";
  out << "setting," << truth.setting << ",noise_sd," << truth.noise_sd
      << ",t_max," << truth.t_max << "\n";
  out << "x1,x2,group,r";
  for (int j = 0; j < truth.fri_basis.n_basis; ++j) out << ",b" << j + 1;
  out << "\n";
  for (Eigen::Index i = 0; i < truth.x1.size(); ++i) {
    out << truth.x1[i] << "," << truth.x2[i] << "," << truth.group[i] << ","
        << truth.r[i];
    for (int j = 0; j < truth.fri_basis.n_basis; ++j)
      out << "," << truth.fri_beta(i, j);
    out << "\n";
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

SimTruth read_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  SimTruth tr;
  std::string line;
  do {
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
  } while (line.empty() || line[0] == '#');
  {
    std::istringstream ss(line);
    std::string key, val;
    while (std::getline(ss, key, ',') && std::getline(ss, val, ',')) {
      if (key == "setting")
        tr.setting = std::stoi(val);
      else if (key == "noise_sd")
        tr.noise_sd = std::stod(val);
      else if (key == "t_max")
        tr.t_max = std::stod(val);
      else
        throw DataError(path + ": unknown header field '" + key + "'");
    }
  }
  if (!std::getline(in, line)) throw DataError(path + ": missing column header");
  std::vector<std::array<double, 4>> base;
  std::vector<std::vector<double>> betas;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() < 5) throw DataError(path + ": short row");
    base.push_back({vals[0], vals[1], vals[2], vals[3]});
    betas.emplace_back(vals.begin() + 4, vals.end());
  }
  const int n = static_cast<int>(base.size());
  if (n == 0) throw DataError(path + ": no subjects");
  const int p = static_cast<int>(betas[0].size());
  tr.fri_basis = BasisSpec{0.0, tr.t_max, p, 3, 2};
  tr.x1.resize(n);
  tr.x2.resize(n);
  tr.group.resize(n);
  tr.r.resize(n);
  tr.fri_beta.resize(n, p);
  for (int i = 0; i < n; ++i) {
    tr.x1[i] = base[i][0];
    tr.x2[i] = base[i][1];
    tr.group[i] = static_cast<int>(base[i][2]);
    tr.r[i] = base[i][3];
    if (static_cast<int>(betas[i].size()) != p)
      throw DataError(path + ": ragged coefficient rows");
    for (int j = 0; j < p; ++j) tr.fri_beta(i, j) = betas[i][j];
  }
  return tr;
}

}  // namespace flexjm
