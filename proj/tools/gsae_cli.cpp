// Command-line front end: fit, predict, bootstrap, simulate, gen-population.

#include "gsae/bootstrap.hpp"
#include "gsae/io.hpp"
#include "gsae/mcem.hpp"
#include "gsae/predict.hpp"
#include "gsae/simulation.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace gsae;

struct EmFlags {
  mcem::EmConfig cfg;
  std::optional<double> fixed_kappa;

  void add(CLI::App* app) {
    app->add_option("--s0", cfg.s0, "EIS regression draws")->capture_default_str();
    app->add_option("--s1", cfg.s1, "SIR proposal draws")->capture_default_str();
    app->add_option("--s2", cfg.s2, "SIR resampled draws")->capture_default_str();
    app->add_option("--window-h", cfg.window_h, "convergence window H")->capture_default_str();
    app->add_option("--window-d", cfg.window_d, "convergence lag d")->capture_default_str();
    app->add_option("--delta", cfg.delta, "convergence denominator offset")->capture_default_str();
    app->add_option("--epsilon", cfg.epsilon, "convergence tolerance")->capture_default_str();
    app->add_option("--max-iter", cfg.max_em_iter, "maximum EM iterations")->capture_default_str();
    app->add_flag("--init-gamma-log", cfg.init_gamma_log,
                  "regress log local variances for the initial gamma");
    app->add_flag("--eis-warm-start", cfg.eis_warm_start,
                  "start EIS from the previous iteration's proposal");
    app->add_option("--fixed-kappa", fixed_kappa, "hold kappa at this value");
  }

  mcem::EmConfig config(std::uint64_t seed, int threads) const {
    auto c = cfg;
    c.seed = seed;
    c.threads = threads;
    c.fixed_kappa = fixed_kappa;
    return c;
  }
};

struct GibbsFlags {
  eb::GibbsConfig cfg;

  void add(CLI::App* app) {
    app->add_option("--gibbs-iters", cfg.iterations, "kept Gibbs sweeps")->capture_default_str();
    app->add_option("--burnin", cfg.burnin, "discarded Gibbs sweeps")->capture_default_str();
  }
};

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

std::string default_trace_path(const std::string& out) {
  const auto dot = out.rfind(".json");
  const std::string stem = dot == std::string::npos ? out : out.substr(0, dot);
  return stem + "_trace.csv";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Small area estimation from grouped data"};
  app.require_subcommand(1);
  std::uint64_t seed = 1;
  int threads = 0;

  // fit
  auto* fit = app.add_subcommand("fit", "estimate the hyperparameters by MCEM");
  std::string fit_data, fit_thresholds, fit_out, fit_trace, fit_ess;
  bool no_meta = false, standardize = false, renormalize = false;
  std::optional<double> shift_c;
  EmFlags em_flags;
  fit->add_option("--data", fit_data, "areas CSV")->required();
  fit->add_option("--thresholds", fit_thresholds, "class cuts c1,...,c_{G-1}")->required();
  fit->add_option("--out", fit_out, "model JSON")->required();
  fit->add_option("--trace", fit_trace, "trace CSV (default: <out>_trace.csv)");
  fit->add_option("--ess", fit_ess, "per-area ESS CSV");
  fit->add_flag("--no-meta", no_meta, "omit the creation timestamp");
  fit->add_flag("--standardize", standardize, "z-score non-constant covariates");
  fit->add_flag("--renormalize-groups", renormalize, "divide class probabilities by their total");
  fit->add_option("--shift-c", shift_c, "Box-Cox shift C");
  fit->add_option("--seed", seed, "master seed")->capture_default_str();
  fit->add_option("--threads", threads, "worker threads (0 = all cores)")->capture_default_str();
  em_flags.add(fit);

  // predict
  auto* predict = app.add_subcommand("predict", "EB estimates of area means and Gini");
  std::string pr_model, pr_data, pr_out, pr_thresholds;
  std::optional<double> naive_cg;
  GibbsFlags pr_gibbs;
  predict->add_option("--model", pr_model, "model JSON")->required();
  predict->add_option("--data", pr_data, "areas CSV")->required();
  predict->add_option("--out", pr_out, "estimates CSV")->required();
  predict->add_option("--thresholds", pr_thresholds, "must match the model's thresholds");
  predict->add_option("--naive-cg", naive_cg, "top-class midpoint for the naive mean");
  predict->add_option("--seed", seed, "master seed");
  predict->add_option("--threads", threads, "worker threads");
  pr_gibbs.add(predict);

  // bootstrap
  auto* boot = app.add_subcommand("bootstrap", "parametric bootstrap RMSE");
  std::string bs_model, bs_data, bs_out;
  int B = 100;
  GibbsFlags bs_gibbs;
  boot->add_option("--model", bs_model, "model JSON")->required();
  boot->add_option("--data", bs_data, "areas CSV")->required();
  boot->add_option("--out", bs_out, "RMSE CSV")->required();
  boot->add_option("--B", B, "replicates")->capture_default_str();
  boot->add_option("--naive-cg", naive_cg, "top-class midpoint for the naive mean");
  boot->add_option("--seed", seed, "master seed");
  boot->add_option("--threads", threads, "worker threads");
  bs_gibbs.add(boot);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "simulation studies");
  simulate->require_subcommand(1);
  auto* mb = simulate->add_subcommand("model-based", "populations generated from the model");
  int mb_m = 100, mb_R = 100;
  long mb_pop = 1000;
  std::string mb_pattern = "10,50,100,150,200", mb_thresholds, mb_truth, mb_out;
  EmFlags mb_em;
  GibbsFlags mb_gibbs;
  mb_gibbs.cfg.compute_gini = false;
  mb->add_option("--m", mb_m, "areas")->capture_default_str();
  mb->add_option("--pop-size", mb_pop, "units per area")->capture_default_str();
  mb->add_option("--n-pattern", mb_pattern, "sample sizes in equal blocks")->capture_default_str();
  mb->add_option("--thresholds", mb_thresholds, "class cuts")->required();
  mb->add_option("--R", mb_R, "replicates")->capture_default_str();
  mb->add_option("--truth", mb_truth, "model JSON holding the true psi");
  mb->add_option("--out", mb_out, "RRMSE CSV")->required();
  mb->add_option("--naive-cg", naive_cg, "top-class midpoint for the naive mean");
  mb->add_option("--seed", seed, "master seed");
  mb->add_option("--threads", threads, "worker threads");
  mb_em.add(mb);
  mb_gibbs.add(mb);

  auto* db = simulate->add_subcommand("design-based", "repeated sampling from a fixed population");
  std::string db_population, db_covariates, db_n, db_thresholds, db_out;
  int db_R = 100;
  EmFlags db_em;
  GibbsFlags db_gibbs;
  db_gibbs.cfg.compute_gini = false;
  db->add_option("--population", db_population, "unit CSV domain_id,value")->required();
  db->add_option("--covariates", db_covariates, "domain CSV area_id,N_pop,x_*")->required();
  db->add_option("--n", db_n, "sample size, or one per domain")->required();
  db->add_option("--thresholds", db_thresholds, "class cuts")->required();
  db->add_option("--shift-c", shift_c, "Box-Cox shift C (default: minimum value - 0.1)");
  db->add_option("--R", db_R, "replicates")->capture_default_str();
  db->add_option("--out", db_out, "RRMSE CSV")->required();
  db->add_option("--naive-cg", naive_cg, "top-class midpoint for the naive mean");
  db->add_option("--seed", seed, "master seed");
  db->add_option("--threads", threads, "worker threads");
  db_em.add(db);
  db_gibbs.add(db);

  // gen-population
  auto* gen = app.add_subcommand("gen-population", "write a synthetic unit-level population");
  int gen_domains = 40, gen_units = 200;
  long gen_pop = 500;
  std::string gen_units_out, gen_cov_out;
  gen->add_option("--domains", gen_domains, "domains")->capture_default_str();
  gen->add_option("--units", gen_units, "source units per domain")->capture_default_str();
  gen->add_option("--pop-size", gen_pop, "N_pop per domain")->capture_default_str();
  gen->add_option("--out-units", gen_units_out, "unit CSV")->required();
  gen->add_option("--out-covariates", gen_cov_out, "domain CSV")->required();
  gen->add_option("--seed", seed, "master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << '\n';
    return 2;
  }

  try {
    if (fit->parsed()) {
      const auto thresholds = io::parse_thresholds(fit_thresholds);
      auto areas = io::load_areas(fit_data, thresholds);
      CovariateScaling scaling;
      if (standardize) {
        scaling = CovariateScaling::fit(areas);
        scaling.apply_inplace(areas);
      }
      ModelOptions options;
      options.shift = shift_c.value_or(0.0);
      options.renormalize_groups = renormalize;
      const auto result = mcem::fit(areas, thresholds, options, em_flags.config(seed, threads));
      print_warnings(result.warnings);
      const auto model = make_model(result, thresholds, options, scaling);
      io::save_model(fit_out, model, no_meta ? std::string{} : timestamp());
      io::write_trace(fit_trace.empty() ? default_trace_path(fit_out) : fit_trace, model);
      if (!fit_ess.empty()) io::write_ess(fit_ess, result.area_ids, result.state.ess_trace);
      std::cerr << (result.converged ? "converged" : "not converged") << " after "
                << result.iterations << " iterations\n";
    } else if (predict->parsed()) {
      const auto model = io::load_model(pr_model);
      if (!pr_thresholds.empty()) io::check_thresholds(model, io::parse_thresholds(pr_thresholds));
      const auto areas = io::load_areas(pr_data, model.thresholds);
      PredictConfig cfg{pr_gibbs.cfg, seed, threads, naive_cg};
      io::write_estimates(pr_out, predict_all(areas, model, cfg));
    } else if (boot->parsed()) {
      const auto model = io::load_model(bs_model);
      const auto areas = prepare_areas(io::load_areas(bs_data, model.thresholds), model);
      bootstrap::BootstrapConfig cfg{B, bs_gibbs.cfg, seed, threads, naive_cg};
      io::write_rmse(bs_out, bootstrap::bootstrap_rmse(areas, model.psi, model.thresholds,
                                                       model.options, cfg));
    } else if (mb->parsed()) {
      sim::ModelBasedConfig cfg;
      cfg.m = mb_m;
      cfg.pop_size = mb_pop;
      cfg.n_pattern.clear();
      for (double v : io::parse_number_list(mb_pattern)) cfg.n_pattern.push_back(static_cast<int>(v));
      cfg.thresholds = io::parse_thresholds(mb_thresholds);
      if (mb_truth.empty()) {
        cfg.psi_true = sim::synthetic_truth();
        std::cerr << "truth: built-in synthetic psi\n";
      } else {
        const auto truth = io::load_model(mb_truth);
        cfg.psi_true = truth.psi;
        cfg.options = truth.options;
      }
      cfg.R = mb_R;
      cfg.seed = seed;
      cfg.em = mb_em.config(seed, 1);
      cfg.gibbs = mb_gibbs.cfg;
      cfg.naive_cg = naive_cg;
      cfg.threads = threads;
      const auto out = sim::simulate_model_based(cfg);
      io::write_rrmse(mb_out, out.rows);
      std::cerr << out.converged_fits << " of " << out.fits << " fits converged\n";
    } else if (db->parsed()) {
      const auto units = io::load_units(db_population);
      const auto domains = io::load_domains(db_covariates);
      sim::DesignBasedConfig cfg;
      cfg.thresholds = io::parse_thresholds(db_thresholds);
      if (shift_c) {
        cfg.shift = *shift_c;
      } else {
        double lo = units.empty() ? 0.0 : units.front().value;
        for (const auto& u : units) lo = std::min(lo, u.value);
        cfg.shift = std::min(lo, 0.0) - 0.1;
      }
      for (double v : io::parse_number_list(db_n)) cfg.n_per_domain.push_back(static_cast<int>(v));
      cfg.R = db_R;
      cfg.seed = seed;
      cfg.em = db_em.config(seed, 1);
      cfg.gibbs = db_gibbs.cfg;
      cfg.naive_cg = naive_cg;
      cfg.threads = threads;
      const auto out = sim::simulate_design_based(units, domains, cfg);
      io::write_rrmse(db_out, out.rows);
      std::cerr << out.converged_fits << " of " << out.fits << " fits converged\n";
    } else if (gen->parsed()) {
      const auto pop = sim::synthetic_population(gen_domains, gen_units, gen_pop, seed);
      io::write_units(gen_units_out, pop.units);
      io::write_areas(gen_cov_out, pop.domains);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: validation: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "error: numerical: " << e.what() << '\n';
    return 1;
  } catch (const io::IoError& e) {
    std::cerr << "error: io: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
