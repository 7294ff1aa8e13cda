// Command line driver: data simulation, model fitting, posterior curve
// export, and summary display. Exit codes: 0 ok, 1 usage/config, 2 data,
// 3 numerical failure.
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "flexjm/artifacts.hpp"
#include "flexjm/config.hpp"
#include "flexjm/data.hpp"
#include "flexjm/errors.hpp"
#include "flexjm/estimation.hpp"
#include "flexjm/model.hpp"
#include "flexjm/simulation.hpp"

namespace {

using namespace flexjm;

struct SimulateArgs {
  SimConfig cfg;
  std::string out;
  bool no_censoring = false, no_noise = false;
};

struct FitArgs {
  std::string surv, lon, config, out;
  unsigned seed = 0;
  bool seed_given = false, mode_only = false;
  int restarts = -1;
};

struct ExportArgs {
  std::string surv, lon, config, fit_dir, what, out;
  double grid_lo = 0.0, grid_hi = 0.0;
  int grid_n = 120;
  bool lo_given = false, hi_given = false;
};

std::string sim_hash(const SimConfig& cfg) {
  nlohmann::json j;
  j["setting"] = cfg.setting;
  j["n"] = cfg.n;
  j["keep_fraction"] = cfg.keep_fraction;
  j["uniform_censoring"] = cfg.uniform_censoring;
  j["add_noise"] = cfg.add_noise;
  j["noise_sd"] = cfg.noise_sd;
  j["ri_var"] = cfg.ri_var;
  j["t_max"] = cfg.t_max;
  return fnv1a_hex(j.dump());
}

int run_simulate(SimulateArgs& a) {
  a.cfg.uniform_censoring = !a.no_censoring;
  a.cfg.add_noise = !a.no_noise;
  std::filesystem::create_directories(a.out);
  const SimOutput sim = simulate_dataset(a.cfg);
  char stamp[160];
  std::snprintf(stamp, sizeof stamp, "config_hash=%s version=%s seed=%u",
                sim_hash(a.cfg).c_str(), kVersion, a.cfg.seed);
  write_dataset(sim.data, a.out + "/survival.csv", a.out + "/longitudinal.csv",
                stamp);
  write_truth(sim.truth, a.out + "/truth.csv", stamp);
  std::printf(
      "simulated setting %d: %d subjects, %d events, %d longitudinal rows "
      "(%d subjects without observations) -> %s\n",
      a.cfg.setting, sim.data.n(), static_cast<int>(sim.data.event.sum()),
      sim.data.n_obs(), sim.subjects_without_obs, a.out.c_str());
  return exit_ok;
}

int classify(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return exit_config;
  if (dynamic_cast<const DataError*>(&e)) return exit_data;
  return exit_numeric;
}

const char* error_kind(int code) {
  return code == exit_config ? "config" : code == exit_data ? "data" : "numerical";
}

int run_fit(FitArgs& a) {
  std::filesystem::create_directories(a.out);
  // Stale artifacts from an earlier run into the same directory would be
  // indistinguishable from this run's output, so clear them up front.
  for (const char* f : {"manifest.json", "mode.json", "chain.csv",
                        "summary.json", "error.json"})
    std::filesystem::remove(a.out + "/" + f);
  const std::string err_path = a.out + "/error.json";
  std::string hash;
  RunManifest man;
  man.started_at = iso8601_now();
  try {
    RunConfig cfg = parse_model_config(a.config);
    if (a.seed_given) cfg.fit.seed = a.seed;
    if (a.restarts >= 0) cfg.fit.max_restarts = a.restarts;
    cfg.fit.mode_only = a.mode_only;
    hash = config_hash(cfg);
    man.config_hash = hash;
    man.seed = cfg.fit.seed;

    const Dataset data = load_dataset(a.surv, a.lon);
    Model model(cfg.model, data);
    write_manifest(man, a.out + "/manifest.json");

    const FitResult fit = run_mcmc(model, cfg.fit);
    write_mode_json(model, fit.mode, fit.mode_logpost, fit.restarts_used,
                    hash, a.out + "/mode.json");
    if (!a.mode_only) {
      write_chain_csv(model, fit, cfg.fit, hash, a.out + "/chain.csv");
      write_summary_json(model, fit, cfg.fit, hash, a.out + "/summary.json");
    }
    man.status = fit.restarts_used == 0
                     ? "converged"
                     : "restarted-" + std::to_string(fit.restarts_used) +
                           "-times";
    man.finished_at = iso8601_now();
    write_manifest(man, a.out + "/manifest.json");
    std::printf("fit %s: log posterior %.6g", man.status.c_str(),
                fit.mode_logpost);
    if (!a.mode_only)
      std::printf(", DIC %.6g (pD %.3g), %d kept draws", fit.dic, fit.pd,
                  static_cast<int>(fit.logpost_draws.size()));
    std::printf(" -> %s\n", a.out.c_str());
    return exit_ok;
  } catch (const std::exception& e) {
    // Every invocation leaves a final manifest; fields the failure predates
    // (hash, seed) stay at their empty defaults.
    man.status = "failed";
    man.finished_at = iso8601_now();
    write_manifest(man, a.out + "/manifest.json");
    const int code = classify(e);
    write_error_json(error_kind(code), e.what(), hash, err_path);
    std::fprintf(stderr, "error: %s\n", e.what());
    return code;
  }
}

int run_export(ExportArgs& a) {
  try {
    const RunConfig cfg = parse_model_config(a.config);
    const std::string hash = config_hash(cfg);
    const std::string chain_path = a.fit_dir + "/chain.csv";
    // Compare the stamped hash before parsing so a config mismatch is
    // reported as such, not as a structural error in the chain layout.
    const std::string stamped = read_artifact_hash(chain_path);
    if (stamped != hash)
      throw DataError("chain in '" + a.fit_dir +
                      "' was produced by a different configuration (hash " +
                      stamped + ", expected " + hash + ")");
    const Dataset data = load_dataset(a.surv, a.lon);
    const Model model(cfg.model, data);
    const LoadedChain chain = read_chain_csv(model, chain_path);
    double lo = a.grid_lo, hi = a.grid_hi;
    if (a.what == "alpha") {
      if (!a.lo_given) lo = -0.5;
      if (!a.hi_given) hi = 2.0;
    } else {
      if (!a.lo_given) lo = 1.0;
      if (!a.hi_given) hi = data.time.maxCoeff();
    }
    if (!(lo < hi) || a.grid_n < 2)
      throw ConfigError("export grid must have lo < hi and at least 2 points");
    const Eigen::VectorXd grid =
        Eigen::VectorXd::LinSpaced(a.grid_n, lo, hi);
    if (a.what == "alpha")
      export_alpha_curve(model, chain.beta_draws, grid, hash, a.out);
    else
      export_lambda_curve(model, chain.beta_draws, grid, hash, a.out);
    std::printf("exported %s curve on [%g, %g] x %d -> %s\n", a.what.c_str(),
                lo, hi, a.grid_n, a.out.c_str());
    return exit_ok;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return classify(e);
  }
}

int run_summarize(const std::string& fit_dir) {
  try {
    std::ifstream in(fit_dir + "/summary.json");
    if (!in)
      throw DataError("cannot open '" + fit_dir +
                      "/summary.json' (was the fit run with --mode-only?)");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fit_dir + "/summary.json: " + e.what());
    }
    std::printf("config %s  seed %u  kept %d  restarts %d\n",
                j.at("config_hash").get<std::string>().c_str(),
                j.at("seed").get<unsigned>(), j.at("n_kept").get<int>(),
                j.at("restarts").get<int>());
    std::printf("mode log posterior %.6g   DIC %.6g (pD %.4g)\n",
                j.at("mode_log_posterior").get<double>(),
                j.at("dic").get<double>(), j.at("pd").get<double>());
    std::printf("%-28s %8s %12s %24s\n", "block", "accept", "mean",
                "95% interval");
    for (const auto& jb : j.at("blocks")) {
      const auto& coefs = jb.at("coefficients");
      const std::string name = jb.at("name").get<std::string>();
      if (coefs.size() <= 12) {
        for (std::size_t c = 0; c < coefs.size(); ++c) {
          const auto& st = coefs[c];
          std::printf("%-28s %8.3f %12.4g    [%10.4g, %10.4g]\n",
                      (name + "[" + std::to_string(c) + "]").c_str(),
                      jb.at("acceptance_rate").get<double>(),
                      st.at("mean").get<double>(), st.at("q025").get<double>(),
                      st.at("q975").get<double>());
        }
      } else {
        std::printf("%-28s %8.3f %12s    (%zu coefficients, see json)\n",
                    name.c_str(), jb.at("acceptance_rate").get<double>(), "-",
                    coefs.size());
      }
    }
    for (const auto& [name, st] : j.at("variances").items())
      std::printf("%-28s %8s %12.4g    [%10.4g, %10.4g]\n", name.c_str(), "-",
                  st.at("mean").get<double>(), st.at("q025").get<double>(),
                  st.at("q975").get<double>());
    const auto& sl = j.at("alpha_average_slope");
    std::printf("%-28s %8s %12.4g    [%10.4g, %10.4g]\n",
                "alpha average slope", "-", sl.at("mean").get<double>(),
                sl.at("q025").get<double>(), sl.at("q975").get<double>());
    return exit_ok;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return classify(e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Flexible Bayesian joint model of longitudinal and survival data"};
  app.require_subcommand(1);

  SimulateArgs sa;
  CLI::App* sim = app.add_subcommand(
      "simulate", "Generate a synthetic joint dataset with known truth");
  sim->add_option("--setting", sa.cfg.setting,
                  "Association scenario: 1 linear, 2 nonlinear, 3 nonlinear "
                  "per group")
      ->required()
      ->check(CLI::Range(1, 3));
  sim->add_option("--n", sa.cfg.n, "Number of subjects")
      ->check(CLI::PositiveNumber);
  sim->add_option("--keep", sa.cfg.keep_fraction,
                  "Fraction of grid measurements kept (0.1 or 0.2 in the "
                  "study designs)")
      ->check(CLI::Range(1e-6, 1.0));
  sim->add_option("--seed", sa.cfg.seed, "RNG seed");
  sim->add_option("--out", sa.out, "Output directory")->required();
  sim->add_flag("--no-censoring", sa.no_censoring,
                "Disable the extra uniform censoring");
  sim->add_flag("--no-noise", sa.no_noise,
                "Emit the latent trajectory without measurement noise");

  FitArgs fa;
  CLI::App* fit = app.add_subcommand("fit", "Fit a joint model to CSV data");
  fit->add_option("--surv", fa.surv, "Survival CSV (id,time,event,covariates)")
      ->required();
  fit->add_option("--long", fa.lon, "Longitudinal CSV (id,time,y)")->required();
  fit->add_option("--config", fa.config, "Model configuration JSON")
      ->required();
  fit->add_option("--out", fa.out, "Output directory")->required();
  fit->add_option("--seed", fa.seed, "Override the configured seed");
  fit->add_flag("--mode-only", fa.mode_only,
                "Stop after the posterior mode, skip sampling");
  fit->add_option("--restarts", fa.restarts,
                  "Override the configured restart budget");

  ExportArgs ea;
  CLI::App* exp = app.add_subcommand(
      "export", "Export posterior effect curves from a fit directory");
  exp->add_option("--surv", ea.surv, "Survival CSV used for the fit")
      ->required();
  exp->add_option("--long", ea.lon, "Longitudinal CSV used for the fit")
      ->required();
  exp->add_option("--config", ea.config, "Model configuration JSON")
      ->required();
  exp->add_option("--fit", ea.fit_dir, "Fit output directory with chain.csv")
      ->required();
  exp->add_option("--what", ea.what, "Curve to export")
      ->required()
      ->check(CLI::IsMember({"alpha", "lambda"}));
  exp->add_option("--out", ea.out, "Output CSV path")->required();
  exp->add_option("--grid-lo", ea.grid_lo, "Grid lower bound");
  exp->add_option("--grid-hi", ea.grid_hi, "Grid upper bound");
  exp->add_option("--grid-n", ea.grid_n, "Grid size");

  std::string sum_dir;
  CLI::App* sum = app.add_subcommand(
      "summarize", "Print a readable digest of a fit's summary.json");
  sum->add_option("--fit", sum_dir, "Fit output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? flexjm::exit_ok : flexjm::exit_config;
  }

  if (sim->parsed()) return run_simulate(sa);
  if (fit->parsed()) {
    fa.seed_given = fit->count("--seed") > 0;
    return run_fit(fa);
  }
  if (exp->parsed()) {
    ea.lo_given = exp->count("--grid-lo") > 0;
    ea.hi_given = exp->count("--grid-hi") > 0;
    return run_export(ea);
  }
  if (sum->parsed()) return run_summarize(sum_dir);
  return flexjm::exit_config;
}
