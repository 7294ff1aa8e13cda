#include "flexjm/artifacts.hpp"

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "flexjm/errors.hpp"

namespace flexjm {

using nlohmann::json;

const char kVersion[] = "0.1.0";

std::string iso8601_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write '" + tmp + "'");
    out << content;
    if (!out) throw DataError("failed writing '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw DataError("cannot move '" + tmp + "' to '" + path +
                    "': " + ec.message());
}

void write_manifest(const RunManifest& man, const std::string& path) {
  json j;
  j["config_hash"] = man.config_hash;
  j["seed"] = man.seed;
  j["version"] = man.version;
  j["started_at"] = man.started_at;
  j["finished_at"] = man.finished_at;
  j["status"] = man.status;
  write_text_atomic(path, j.dump(2) + "\n");
}

namespace {

json stats_json(const ChainStats& st) {
  json j;
  j["mean"] = st.mean;
  j["sd"] = st.sd;
  j["q025"] = st.q025;
  j["q975"] = st.q975;
  return j;
}

}  // namespace

void write_mode_json(const Model& m, const ThetaState& s, double logpost,
                     int restarts, const std::string& hash,
                     const std::string& path) {
  json j;
  j["config_hash"] = hash;
  j["version"] = kVersion;
  j["log_posterior"] = logpost;
  j["restarts"] = restarts;
  json blocks = json::array();
  for (int b = 0; b < m.n_blocks(); ++b) {
    json jb;
    jb["name"] = m.block(b).name;
    jb["coefficients"] = std::vector<double>(
        s.beta[b].data(), s.beta[b].data() + s.beta[b].size());
    blocks.push_back(std::move(jb));
  }
  j["blocks"] = std::move(blocks);
  json vars;
  for (int v = 0; v < m.n_var_slots(); ++v)
    vars[m.var_slot_names()[v]] = s.tau2[v];
  j["variances"] = std::move(vars);
  write_text_atomic(path, j.dump(2) + "\n");
}

void write_chain_csv(const Model& m, const FitResult& fit,
                     const FitOptions& opt, const std::string& hash,
                     const std::string& path) {
  const int kept = fit.logpost_draws.size();
  std::vector<int> iters;
  iters.reserve(kept);
  for (int it = opt.burnin + 1; it <= opt.mcmc_iters; ++it)
    if ((it - opt.burnin) % opt.thin == 0) iters.push_back(it);
  if (static_cast<int>(iters.size()) != kept)
    throw NumericalError("chain length does not match the sampler settings");

  std::string out;
  out.reserve(64u * kept * (m.n_var_slots() + 8));
  char buf[128];
  std::snprintf(buf, sizeof buf, "# config_hash=%s version=%s seed=%u\n",
                hash.c_str(), kVersion, opt.seed);
  out += buf;
  out += "iteration,block,index,value\n";
  for (int k = 0; k < kept; ++k) {
    const int it = iters[k];
    for (int b = 0; b < m.n_blocks(); ++b) {
      const std::string& name = m.block(b).name;
      for (int c = 0; c < m.block(b).dim; ++c) {
        std::snprintf(buf, sizeof buf, "%d,%s,%d,%.17g\n", it, name.c_str(), c,
                      fit.beta_draws[b](k, c));
        out += buf;
      }
    }
    for (int v = 0; v < m.n_var_slots(); ++v) {
      std::snprintf(buf, sizeof buf, "%d,%s,0,%.17g\n", it,
                    m.var_slot_names()[v].c_str(), fit.tau2_draws(k, v));
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "%d,logpost,0,%.17g\n", it,
                  fit.logpost_draws[k]);
    out += buf;
    std::snprintf(buf, sizeof buf, "%d,loglik,0,%.17g\n", it,
                  fit.loglik_draws[k]);
    out += buf;
  }
  write_text_atomic(path, out);
}

std::string read_artifact_hash(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  while (std::getline(in, line) && (line.empty() || line[0] == '#')) {
    const std::string key = "config_hash=";
    const auto pos = line.find(key);
    if (pos != std::string::npos) {
      const auto start = pos + key.size();
      const auto end = line.find(' ', start);
      return line.substr(start, end == std::string::npos ? std::string::npos
                                                         : end - start);
    }
  }
  return {};
}

LoadedChain read_chain_csv(const Model& m, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  LoadedChain ch;

  std::string line;
  while (std::getline(in, line) && (line.empty() || line[0] == '#')) {
    const std::string key = "config_hash=";
    const auto pos = line.find(key);
    if (pos != std::string::npos) {
      const auto start = pos + key.size();
      const auto end = line.find(' ', start);
      ch.config_hash = line.substr(start, end == std::string::npos
                                              ? std::string::npos
                                              : end - start);
    }
  }
  if (line != "iteration,block,index,value")
    throw DataError(path + ": not a chain file (bad or missing header)");

  std::map<std::string, int> block_of;
  for (int b = 0; b < m.n_blocks(); ++b) block_of[m.block(b).name] = b;
  std::map<std::string, int> slot_of;
  for (int v = 0; v < m.n_var_slots(); ++v)
    slot_of[m.var_slot_names()[v]] = v;

  std::vector<std::vector<double>> beta(m.n_blocks());
  std::vector<std::vector<double>> tau(m.n_var_slots());
  std::vector<double> logpost, loglik;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string it_s, name, idx_s, val_s;
    if (!std::getline(ss, it_s, ',') || !std::getline(ss, name, ',') ||
        !std::getline(ss, idx_s, ',') || !std::getline(ss, val_s))
      throw DataError(path + " row " + std::to_string(row) + ": malformed");
    const double val = std::strtod(val_s.c_str(), nullptr);
    if (auto itb = block_of.find(name); itb != block_of.end())
      beta[itb->second].push_back(val);
    else if (auto itv = slot_of.find(name); itv != slot_of.end())
      tau[itv->second].push_back(val);
    else if (name == "logpost")
      logpost.push_back(val);
    else if (name == "loglik")
      loglik.push_back(val);
    else
      throw DataError(path + " row " + std::to_string(row) +
                      ": block '" + name + "' not in this model");
  }
  const int kept = static_cast<int>(logpost.size());
  if (kept == 0) throw DataError(path + ": no draws");
  ch.beta_draws.resize(m.n_blocks());
  for (int b = 0; b < m.n_blocks(); ++b) {
    const int dim = m.block(b).dim;
    if (static_cast<int>(beta[b].size()) != kept * dim)
      throw DataError(path + ": block '" + m.block(b).name +
                      "' has an incomplete draw set");
    ch.beta_draws[b] =
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>(beta[b].data(), kept, dim);
  }
  ch.tau2_draws.resize(kept, m.n_var_slots());
  for (int v = 0; v < m.n_var_slots(); ++v) {
    if (static_cast<int>(tau[v].size()) != kept)
      throw DataError(path + ": variance '" + m.var_slot_names()[v] +
                      "' has an incomplete draw set");
    ch.tau2_draws.col(v) = Eigen::Map<Eigen::VectorXd>(tau[v].data(), kept);
  }
  if (loglik.size() != logpost.size())
    throw DataError(path + ": log likelihood rows missing");
  ch.logpost_draws = Eigen::Map<Eigen::VectorXd>(logpost.data(), kept);
  ch.loglik_draws = Eigen::Map<Eigen::VectorXd>(loglik.data(), kept);
  return ch;
}

Eigen::VectorXd alpha_slope_draws(
    const Model& m, const std::vector<Eigen::MatrixXd>& beta_draws) {
  const int kept = static_cast<int>(beta_draws.empty() ? 0 : beta_draws[0].rows());
  if (kept == 0) throw NumericalError("no draws to evaluate");
  const Eigen::VectorXi level =
      m.assoc().n_levels > 0 ? m.assoc().level
                             : Eigen::VectorXi::Zero(m.n());
  ThetaState s = m.make_state();
  Eigen::VectorXd slope(kept);
  for (int k = 0; k < kept; ++k) {
    for (int b = 0; b < m.n_blocks(); ++b) s.beta[b] = beta_draws[b].row(k);
    m.refresh_all(s);
    const Eigen::MatrixXd D =
        m.assoc_design_at(s.eta_mu_evt, m.data().time, level, 1);
    slope[k] = (D * s.beta[m.alpha_block()]).mean();
  }
  return slope;
}

void write_summary_json(const Model& m, const FitResult& fit,
                        const FitOptions& opt, const std::string& hash,
                        const std::string& path) {
  json j;
  j["config_hash"] = hash;
  j["version"] = kVersion;
  j["seed"] = opt.seed;
  j["n_kept"] = static_cast<int>(fit.logpost_draws.size());
  j["restarts"] = fit.restarts_used;
  j["mode_log_posterior"] = fit.mode_logpost;
  j["dic"] = fit.dic;
  j["pd"] = fit.pd;
  json blocks = json::array();
  for (int b = 0; b < m.n_blocks(); ++b) {
    json jb;
    jb["name"] = m.block(b).name;
    jb["acceptance_rate"] = fit.accept_rate[b];
    json coefs = json::array();
    for (int c = 0; c < m.block(b).dim; ++c)
      coefs.push_back(stats_json(summarize(fit.beta_draws[b].col(c))));
    jb["coefficients"] = std::move(coefs);
    blocks.push_back(std::move(jb));
  }
  j["blocks"] = std::move(blocks);
  json vars;
  for (int v = 0; v < m.n_var_slots(); ++v)
    vars[m.var_slot_names()[v]] = stats_json(summarize(fit.tau2_draws.col(v)));
  j["variances"] = std::move(vars);
  j["alpha_average_slope"] =
      stats_json(summarize(alpha_slope_draws(m, fit.beta_draws)));
  write_text_atomic(path, j.dump(2) + "\n");
}

void write_error_json(const std::string& kind, const std::string& message,
                      const std::string& hash, const std::string& path) {
  json j;
  j["error"] = kind;
  j["message"] = message;
  j["config_hash"] = hash;
  j["version"] = kVersion;
  write_text_atomic(path, j.dump(2) + "\n");
}

namespace {

void write_curve_csv(const Eigen::VectorXd& grid,
                     const std::vector<Eigen::MatrixXd>& values_per_level,
                     const std::string& hash, const std::string& path) {
  std::string out = "# config_hash=" + hash + " version=" + kVersion + "\n";
  out += "grid,level,mean,q025,q975\n";
  char buf[160];
  for (std::size_t lev = 0; lev < values_per_level.size(); ++lev)
    for (Eigen::Index g = 0; g < grid.size(); ++g) {
      const ChainStats st = summarize(values_per_level[lev].row(g));
      std::snprintf(buf, sizeof buf, "%.17g,%zu,%.17g,%.17g,%.17g\n", grid[g],
                    lev, st.mean, st.q025, st.q975);
      out += buf;
    }
  write_text_atomic(path, out);
}

}  // namespace

void export_alpha_curve(const Model& m,
                        const std::vector<Eigen::MatrixXd>& beta_draws,
                        const Eigen::VectorXd& grid, const std::string& hash,
                        const std::string& path) {
  const Eigen::MatrixXd& B = beta_draws[m.alpha_block()];
  const int levels = std::max(1, m.assoc().n_levels);
  const Eigen::VectorXd t0 = Eigen::VectorXd::Zero(grid.size());
  std::vector<Eigen::MatrixXd> vals(levels);
  for (int lev = 0; lev < levels; ++lev) {
    const Eigen::VectorXi lv = Eigen::VectorXi::Constant(grid.size(), lev);
    vals[lev] = m.assoc_design_at(grid, t0, lv, 0) * B.transpose();
  }
  write_curve_csv(grid, vals, hash, path);
}

void export_lambda_curve(const Model& m,
                         const std::vector<Eigen::MatrixXd>& beta_draws,
                         const Eigen::VectorXd& grid, const std::string& hash,
                         const std::string& path) {
  const int kept = static_cast<int>(beta_draws[0].rows());
  ThetaState s = m.make_state();
  std::vector<Eigen::MatrixXd> vals(1);
  vals[0].resize(grid.size(), kept);
  // eval_predictor reads raw coefficients only, so no cache refresh is
  // needed; the baseline is subject-independent, so subject 0 stands in.
  for (int k = 0; k < kept; ++k) {
    for (int b : m.pred_blocks(PredictorId::lambda))
      s.beta[b] = beta_draws[b].row(k);
    for (Eigen::Index g = 0; g < grid.size(); ++g)
      vals[0](g, k) = m.eval_predictor(s, PredictorId::lambda, 0, grid[g]);
  }
  write_curve_csv(grid, vals, hash, path);
}

}  // namespace flexjm
