#include "flexjm/config.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "flexjm/errors.hpp"

namespace flexjm {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

const json& expect_object(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  return j;
}

int get_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where, "expected an integer");
  return v.get<int>();
}

double get_num(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  return v.get<double>();
}

std::string get_str(const json& v, const std::string& where) {
  if (!v.is_string()) fail(where, "expected a string");
  return v.get<std::string>();
}

TermKind term_kind(const std::string& s, const std::string& where) {
  if (s == "intercept") return TermKind::intercept;
  if (s == "linear") return TermKind::linear_covariate;
  if (s == "pspline") return TermKind::pspline_covariate;
  if (s == "pspline_time") return TermKind::pspline_time;
  if (s == "random_intercept") return TermKind::random_intercept;
  if (s == "functional_random_intercept")
    return TermKind::functional_random_intercept;
  fail(where, "unknown term kind '" + s +
                  "' (expected intercept, linear, pspline, pspline_time, "
                  "random_intercept or functional_random_intercept)");
}

const char* term_kind_name(TermKind k) {
  switch (k) {
    case TermKind::intercept: return "intercept";
    case TermKind::linear_covariate: return "linear";
    case TermKind::pspline_covariate: return "pspline";
    case TermKind::pspline_time: return "pspline_time";
    case TermKind::random_intercept: return "random_intercept";
    case TermKind::functional_random_intercept:
      return "functional_random_intercept";
  }
  return "?";
}

TermSpec parse_term(const json& j, const std::string& where) {
  expect_object(j, where);
  if (!j.contains("kind")) fail(where, "term is missing 'kind'");
  TermSpec t;
  for (const auto& [key, val] : j.items()) {
    const std::string at = where + "." + key;
    if (key == "kind")
      t.kind = term_kind(get_str(val, at), at);
    else if (key == "covariate")
      t.covariate = get_str(val, at);
    else if (key == "n_basis")
      t.n_basis = get_int(val, at);
    else if (key == "degree")
      t.degree = get_int(val, at);
    else if (key == "diff_order")
      t.diff_order = get_int(val, at);
    else if (key == "hyper_a")
      t.hyper_a = get_num(val, at);
    else if (key == "hyper_b")
      t.hyper_b = get_num(val, at);
    else
      fail(at, "unknown term key");
  }
  const bool needs_cov = t.kind == TermKind::linear_covariate ||
                         t.kind == TermKind::pspline_covariate;
  if (needs_cov && t.covariate.empty())
    fail(where, std::string("term kind '") + term_kind_name(t.kind) +
                    "' requires 'covariate'");
  if (!needs_cov && !t.covariate.empty())
    fail(where, std::string("term kind '") + term_kind_name(t.kind) +
                    "' does not take 'covariate'");
  return t;
}

std::vector<TermSpec> parse_predictor(const json& j, const std::string& where) {
  expect_object(j, where);
  std::vector<TermSpec> terms;
  for (const auto& [key, val] : j.items()) {
    if (key != "terms") fail(where + "." + key, "unknown predictor key");
    if (!val.is_array()) fail(where + ".terms", "expected an array");
    for (std::size_t i = 0; i < val.size(); ++i)
      terms.push_back(
          parse_term(val[i], where + ".terms[" + std::to_string(i) + "]"));
  }
  if (!j.contains("terms")) fail(where, "predictor section needs 'terms'");
  return terms;
}

AssocSpec parse_assoc(const json& j, const std::string& where) {
  expect_object(j, where);
  if (j.empty())
    fail(where, "association section is empty; a joint model requires one");
  AssocSpec a;
  bool saw_g1 = false, saw_g2 = false;
  for (const auto& [key, val] : j.items()) {
    const std::string at = where + "." + key;
    if (key == "g1") {
      const std::string s = get_str(val, at);
      if (s == "identity")
        a.g1 = G1Kind::identity;
      else if (s == "pspline")
        a.g1 = G1Kind::pspline;
      else
        fail(at, "unknown g1 kind '" + s + "' (identity or pspline)");
      saw_g1 = true;
    } else if (key == "g2") {
      const std::string s = get_str(val, at);
      if (s == "constant")
        a.g2 = G2Kind::constant;
      else if (s == "covariate")
        a.g2 = G2Kind::covariate;
      else if (s == "group_factor")
        a.g2 = G2Kind::group_factor;
      else if (s == "pspline_time")
        a.g2 = G2Kind::pspline_time;
      else
        fail(at, "unknown g2 kind '" + s +
                     "' (constant, covariate, group_factor or pspline_time)");
      saw_g2 = true;
    } else if (key == "covariate")
      a.covariate = get_str(val, at);
    else if (key == "n_levels")
      a.n_levels = get_int(val, at);
    else if (key == "g1_n_basis")
      a.g1_n_basis = get_int(val, at);
    else if (key == "g1_degree")
      a.g1_degree = get_int(val, at);
    else if (key == "g1_diff_order")
      a.g1_diff_order = get_int(val, at);
    else if (key == "g2_n_basis")
      a.g2_n_basis = get_int(val, at);
    else if (key == "g2_degree")
      a.g2_degree = get_int(val, at);
    else if (key == "g2_diff_order")
      a.g2_diff_order = get_int(val, at);
    else if (key == "grid_size")
      a.grid_size = get_int(val, at);
    else if (key == "hyper_a")
      a.hyper_a = get_num(val, at);
    else if (key == "hyper_b")
      a.hyper_b = get_num(val, at);
    else
      fail(at, "unknown association key");
  }
  if (!saw_g1 || !saw_g2)
    fail(where, "association must declare both 'g1' and 'g2'");
  const bool needs_cov =
      a.g2 == G2Kind::covariate || a.g2 == G2Kind::group_factor;
  if (needs_cov && a.covariate.empty())
    fail(where, "this g2 kind requires 'covariate'");
  if (a.g2 == G2Kind::group_factor && a.n_levels < 2)
    fail(where, "group_factor requires n_levels >= 2");
  return a;
}

void parse_mcmc(const json& j, FitOptions& f, const std::string& where) {
  expect_object(j, where);
  for (const auto& [key, val] : j.items()) {
    const std::string at = where + "." + key;
    if (key == "iterations")
      f.mcmc_iters = get_int(val, at);
    else if (key == "burnin")
      f.burnin = get_int(val, at);
    else if (key == "thin")
      f.thin = get_int(val, at);
    else if (key == "seed")
      f.seed = static_cast<unsigned>(get_int(val, at));
    else if (key == "restarts")
      f.max_restarts = get_int(val, at);
    else
      fail(at, "unknown mcmc key");
  }
  if (f.burnin >= f.mcmc_iters)
    fail(where, "burnin must be smaller than iterations");
  if (f.thin < 1) fail(where, "thin must be at least 1");
}

void parse_mode(const json& j, FitOptions& f, const std::string& where) {
  expect_object(j, where);
  for (const auto& [key, val] : j.items()) {
    const std::string at = where + "." + key;
    if (key == "max_backfit")
      f.max_backfit = get_int(val, at);
    else if (key == "tol")
      f.mode_tol = get_num(val, at);
    else if (key == "variance_grid")
      f.var_grid = get_int(val, at);
    else if (key == "variance_log10_min")
      f.var_log10_lo = get_num(val, at);
    else if (key == "variance_log10_max")
      f.var_log10_hi = get_num(val, at);
    else
      fail(at, "unknown mode key");
  }
  if (f.var_grid < 1) fail(where, "variance_grid must be positive");
  if (!(f.var_log10_lo < f.var_log10_hi))
    fail(where, "variance grid bounds must be increasing");
}

json term_to_json(const TermSpec& t) {
  json j;
  j["kind"] = term_kind_name(t.kind);
  if (!t.covariate.empty()) j["covariate"] = t.covariate;
  j["n_basis"] = t.n_basis;
  j["degree"] = t.degree;
  j["diff_order"] = t.diff_order;
  j["hyper_a"] = t.hyper_a;
  j["hyper_b"] = t.hyper_b;
  return j;
}

}  // namespace

RunConfig parse_model_config_text(const std::string& text,
                                  const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  expect_object(root, origin);

  RunConfig cfg;
  bool saw_assoc = false;
  bool saw[4] = {false, false, false, false};
  for (const auto& [key, val] : root.items()) {
    const std::string at = origin + ":" + key;
    if (key == "lambda") {
      cfg.model.lambda = parse_predictor(val, at);
      saw[0] = true;
    } else if (key == "gamma") {
      cfg.model.gamma = parse_predictor(val, at);
      saw[1] = true;
    } else if (key == "mu") {
      cfg.model.mu = parse_predictor(val, at);
      saw[2] = true;
    } else if (key == "sigma") {
      cfg.model.sigma = parse_predictor(val, at);
      saw[3] = true;
    } else if (key == "association") {
      cfg.model.alpha = parse_assoc(val, at);
      saw_assoc = true;
    } else if (key == "quad_nodes") {
      cfg.model.quad_nodes = get_int(val, at);
    } else if (key == "vague_sd") {
      cfg.model.vague_sd = get_num(val, at);
    } else if (key == "mcmc") {
      parse_mcmc(val, cfg.fit, at);
    } else if (key == "mode") {
      parse_mode(val, cfg.fit, at);
    } else {
      fail(at, "unknown top-level key");
    }
  }
  const char* preds[4] = {"lambda", "gamma", "mu", "sigma"};
  for (int k = 0; k < 4; ++k)
    if (!saw[k])
      fail(origin, std::string("missing predictor section '") + preds[k] + "'");
  if (!saw_assoc)
    fail(origin, "missing 'association' section; a joint model requires one");
  if (cfg.model.quad_nodes < 2)
    fail(origin, "quad_nodes must be at least 2");
  return cfg;
}

RunConfig parse_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model_config_text(buf.str(), path);
}

std::string config_canonical(const RunConfig& cfg) {
  json root;
  const std::vector<TermSpec>* preds[4] = {&cfg.model.lambda, &cfg.model.gamma,
                                           &cfg.model.mu, &cfg.model.sigma};
  const char* names[4] = {"lambda", "gamma", "mu", "sigma"};
  for (int k = 0; k < 4; ++k) {
    json terms = json::array();
    for (const TermSpec& t : *preds[k]) terms.push_back(term_to_json(t));
    root[names[k]]["terms"] = std::move(terms);
  }
  const AssocSpec& a = cfg.model.alpha;
  json& ja = root["association"];
  ja["g1"] = a.g1 == G1Kind::identity ? "identity" : "pspline";
  ja["g2"] = a.g2 == G2Kind::constant       ? "constant"
             : a.g2 == G2Kind::covariate    ? "covariate"
             : a.g2 == G2Kind::group_factor ? "group_factor"
                                            : "pspline_time";
  if (!a.covariate.empty()) ja["covariate"] = a.covariate;
  ja["n_levels"] = a.n_levels;
  ja["g1_n_basis"] = a.g1_n_basis;
  ja["g1_degree"] = a.g1_degree;
  ja["g1_diff_order"] = a.g1_diff_order;
  ja["g2_n_basis"] = a.g2_n_basis;
  ja["g2_degree"] = a.g2_degree;
  ja["g2_diff_order"] = a.g2_diff_order;
  ja["grid_size"] = a.grid_size;
  ja["hyper_a"] = a.hyper_a;
  ja["hyper_b"] = a.hyper_b;
  root["quad_nodes"] = cfg.model.quad_nodes;
  root["vague_sd"] = cfg.model.vague_sd;
  // The seed is deliberately left out: it names a run, not a model.
  root["mcmc"]["iterations"] = cfg.fit.mcmc_iters;
  root["mcmc"]["burnin"] = cfg.fit.burnin;
  root["mcmc"]["thin"] = cfg.fit.thin;
  root["mcmc"]["restarts"] = cfg.fit.max_restarts;
  root["mode"]["max_backfit"] = cfg.fit.max_backfit;
  root["mode"]["tol"] = cfg.fit.mode_tol;
  root["mode"]["variance_grid"] = cfg.fit.var_grid;
  root["mode"]["variance_log10_min"] = cfg.fit.var_log10_lo;
  root["mode"]["variance_log10_max"] = cfg.fit.var_log10_hi;
  return root.dump();
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const RunConfig& cfg) {
  return fnv1a_hex(config_canonical(cfg));
}

}  // namespace flexjm
