// Acceptance criteria 1-10. `acceptance NN` runs one criterion, no argument
// runs all of them. Each criterion prints one PASS or FAIL line; the exit code
// is nonzero when any selected criterion fails.

#include "gsae/baseline.hpp"
#include "gsae/bootstrap.hpp"
#include "gsae/eb.hpp"
#include "gsae/eis.hpp"
#include "gsae/io.hpp"
#include "gsae/likelihood.hpp"
#include "gsae/mcem.hpp"
#include "gsae/predict.hpp"
#include "gsae/simulation.hpp"

#include "oracles.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace gsae;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Strictly increasing positive cuts for G classes.
Thresholds random_cuts(int G, Rng& rng) {
  std::vector<double> c;
  double v = 0.2 + 1.8 * rng.uniform();
  for (int g = 1; g < G; ++g) {
    c.push_back(v);
    v += 0.3 + 2.7 * rng.uniform();
  }
  return Thresholds(c);
}

// Oracle class probabilities by quadrature of the transformed-normal density
// on the original scale.
std::vector<double> oracle_probs(double mu, double sigma, double kappa, double shift, const Thresholds& t) {
  std::vector<double> p;
  for (int g = 0; g < t.groups(); ++g) {
    const double lo = g == 0 ? shift : t.boundary(g);
    const double hi = t.boundary(g + 1);
    p.push_back(oracle::transformed_normal_mass(mu, sigma, kappa, shift, lo, hi));
  }
  return p;
}

// 1. group_probs against quadrature.
Outcome criterion_01() {
  Stopwatch clock;
  Rng rng(101);
  double worst = 0.0;
  for (int c = 0; c < 200; ++c) {
    const double mu = -1.0 + 4.0 * rng.uniform();
    const double sigma = 0.1 + 1.9 * rng.uniform();
    const double kappa = c % 10 == 0 ? 0.0 : -0.5 + 1.5 * rng.uniform();
    const double shift = c % 2 == 0 ? 0.0 : -2.0 * rng.uniform();
    const int G = 2 + static_cast<int>(8 * rng.uniform());
    const auto t = random_cuts(G, rng);
    ModelOptions options;
    options.shift = shift;
    const auto got = group_probs(mu, sigma * sigma, kappa, t, options).probs;
    const auto want = oracle_probs(mu, sigma, kappa, shift, t);
    for (int g = 0; g < G; ++g) worst = std::max(worst, std::abs(got[static_cast<std::size_t>(g)] - want[static_cast<std::size_t>(g)]));
  }
  const double secs = clock.seconds();
  return {worst <= 1e-8 && secs < 30.0,
          "200 configurations, max |diff| = " + fmt("%.3g", worst) + " (tol 1e-08), " + fmt("%.2f", secs) +
              " s (limit 30 s)"};
}

// All count vectors of size n over G classes.
void for_each_outcome(int n, int G, const std::function<void(const std::vector<int>&)>& f) {
  for (const auto& y : oracle::compositions(n, G)) f(y);
}

// 2. Exhaustive multinomial pmf.
Outcome criterion_02() {
  Rng rng(202);
  double worst = 0.0;
  long checked = 0;
  for (int c = 0; c < 20; ++c) {
    const double mu = -0.5 + 2.5 * rng.uniform();
    const double sigma = 0.3 + 1.2 * rng.uniform();
    const double kappa = c % 4 == 0 ? 0.0 : -0.3 + 0.9 * rng.uniform();
    for (int G = 2; G <= 3; ++G) {
      const auto t = random_cuts(G, rng);
      const auto p = oracle_probs(mu, sigma, kappa, 0.0, t);
      for (int n = 0; n <= 6; ++n) {
        for_each_outcome(n, G, [&](const std::vector<int>& y) {
          const double got = log_pmf(GroupedSample(y), mu, sigma * sigma, kappa, t);
          const double want = static_cast<double>(std::log(oracle::multinomial_mass(y, p)));
          worst = std::max(worst, std::abs(got - want));
          ++checked;
        });
      }
    }
  }
  return {worst <= 1e-10, std::to_string(checked) + " outcomes (n <= 6, G <= 3), max |diff| = " +
                              fmt("%.3g", worst) + " (tol 1e-10)"};
}

// 3. Weighted least squares against dense normal equations.
Outcome criterion_03() {
  Rng rng(303);
  double worst = 0.0;
  int solved = 0;
  for (int c = 0; c < 100; ++c) {
    const int S = 30 + static_cast<int>(470 * rng.uniform());
    std::vector<RandomEffects> draws(static_cast<std::size_t>(S));
    const double sb = 0.1 + 2.0 * rng.uniform();
    for (auto& u : draws) {
      u.b = sb * rng.normal();
      u.sigma2 = std::exp(-1.0 + 1.5 * rng.normal() * 0.5);
    }
    const Eigen::MatrixXd Z = eis::eis_design(draws);
    Eigen::VectorXd f(S);
    Eigen::VectorXd w(S);
    for (int s = 0; s < S; ++s) {
      f[s] = 3.0 * rng.normal() + Z(s, 1) - 0.5 * Z(s, 2);
      w[s] = std::exp(2.0 * rng.normal());
    }
    const auto got = eis::gls_solve(Z, f, w);
    if (!got) continue;
    ++solved;
    const Eigen::VectorXd want = oracle::normal_equations(Z, f, w);
    worst = std::max(worst, (*got - want).norm() / want.norm());
  }
  return {solved == 100 && worst <= 1e-8, std::to_string(solved) + "/100 solved, max relative diff = " +
                                               fmt("%.3g", worst) + " (tol 1e-08)"};
}

struct BatchMean {
  double mean = 0.0;
  double se = 0.0;
};

BatchMean batch_mean(const std::vector<double>& x, int batches = 50) {
  const std::size_t len = x.size() / static_cast<std::size_t>(batches);
  std::vector<double> means(static_cast<std::size_t>(batches), 0.0);
  for (std::size_t b = 0; b < means.size(); ++b) {
    for (std::size_t k = 0; k < len; ++k) means[b] += x[b * len + k];
    means[b] /= static_cast<double>(len);
  }
  BatchMean out;
  for (double m : means) out.mean += m;
  out.mean /= batches;
  double var = 0.0;
  for (double m : means) var += (m - out.mean) * (m - out.mean);
  out.se = std::sqrt(var / (batches - 1) / batches);
  return out;
}

// 4. Gibbs moments against 2-D quadrature on the N=3, n=2, G=2, kappa=0 toy.
Outcome criterion_04() {
  Stopwatch clock;
  const Thresholds t({2.0});
  Hyperparameters psi;
  psi.beta = Eigen::VectorXd::Constant(1, 0.8);
  psi.gamma = Eigen::VectorXd::Constant(1, -0.5);
  psi.tau2 = 0.5;
  psi.lambda = 6.0;
  psi.kappa = 0.0;
  const GroupedSample y({1, 1});
  const AreaRecord area{"toy", Eigen::VectorXd::Ones(1), 3, y};
  const eb::AreaChain chain(area, psi, t, {});
  Rng rng(404);
  auto s = eb::initial_draw(chain);
  long clamped = 0;
  for (int k = 0; k < 1000; ++k) eb::gibbs_update(s, chain, rng, clamped);
  std::vector<double> mu;
  std::vector<double> mu2;
  std::vector<double> s2;
  for (int k = 0; k < 100000; ++k) {
    eb::gibbs_update(s, chain, rng, clamped);
    mu.push_back(s.mu);
    mu2.push_back(s.mu * s.mu);
    s2.push_back(s.sigma2);
  }
  // Posterior of (mu, sigma2): the out-of-sample unit integrates out and each
  // sampled unit contributes its class probability.
  const double shape = psi.sigma2_shape();
  const double scale = psi.lambda * std::exp(psi.gamma[0]) / 2.0;
  const oracle::GridPosterior grid{[&](double m, double v) {
                                     const double sd = std::sqrt(v);
                                     const double c = std::log(2.0);
                                     double lp = -0.5 * (m - psi.beta[0]) * (m - psi.beta[0]) / psi.tau2;
                                     lp += -(shape + 1.0) * std::log(v) - scale / v;
                                     lp += std::log(oracle::phi_cdf((c - m) / sd));
                                     lp += std::log(1.0 - oracle::phi_cdf((c - m) / sd));
                                     return lp;
                                   },
                                   -4.0, 6.0, -7.0, 4.0};
  const auto want = grid.expect({[](double m, double) { return m; }, [](double m, double) { return m * m; },
                                 [](double, double v) { return v; }});
  const BatchMean got[3] = {batch_mean(mu), batch_mean(mu2), batch_mean(s2)};
  const char* names[3] = {"E[mu]", "E[mu^2]", "E[sigma2]"};
  bool ok = true;
  std::string detail;
  // The criterion gates on the posterior means; E[mu^2] is reported only.
  for (int j = 0; j < 3; ++j) {
    const double z = std::abs(got[j].mean - want[static_cast<std::size_t>(j)]) / got[j].se;
    if (j != 1) ok = ok && z <= 3.0;
    detail += std::string(names[j]) + " " + fmt("%.4f", got[j].mean) + " vs " +
              fmt("%.4f", want[static_cast<std::size_t>(j)]) + " (" + fmt("%.2f", z) + " SE" +
              (j == 1 ? ", not gated" : "") + "); ";
  }
  const double secs = clock.seconds();
  ok = ok && secs < 120.0;
  return {ok, detail + "1e5 draws, limit 3 SE, " + fmt("%.1f", secs) + " s (limit 120 s)"};
}

// 5. Gini formula against pairwise mean absolute difference.
Outcome criterion_05() {
  Rng rng(505);
  double worst = 0.0;
  for (int c = 0; c < 1000; ++c) {
    const int N = 2 + static_cast<int>(200 * rng.uniform());
    std::vector<double> z(static_cast<std::size_t>(N));
    for (double& v : z) v = std::exp(rng.normal());
    worst = std::max(worst, std::abs(baseline::gini(z) - oracle::pairwise_gini(z)));
  }
  const double g123 = baseline::gini(std::vector<double>{1.0, 2.0, 3.0});
  const double err123 = std::abs(g123 - 2.0 / 9.0);
  return {worst <= 1e-10 && err123 <= 1e-12, "1000 vectors, max |diff| = " + fmt("%.3g", worst) +
                                                  " (tol 1e-10); {1,2,3} error " + fmt("%.3g", err123) +
                                                  " (tol 1e-12)"};
}

// Grouped samples drawn from the model at psi: one area per covariate row.
std::vector<AreaRecord> simulate_areas(const Hyperparameters& psi, const std::vector<Eigen::VectorXd>& xs,
                                       int n, const Thresholds& t, std::uint64_t seed) {
  std::vector<AreaRecord> areas;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    AreaRecord a{"A" + std::to_string(i + 1), xs[i], n, std::nullopt};
    Rng rng = Rng::stream(seed, Purpose::kPopulation, i);
    long clamped = 0;
    const auto z = bootstrap::generate_population(a, psi, {}, rng, clamped);
    a.sample = bootstrap::group_values(z, t);
    areas.push_back(std::move(a));
  }
  return areas;
}

int cores() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

// 6. Marginal log-likelihood along the EM path.
Outcome criterion_06() {
  Stopwatch clock;
  const Thresholds t({3, 5, 7, 10});
  const auto psi_true = sim::synthetic_truth();
  const auto areas = simulate_areas(psi_true, sim::synthetic_covariates(20, 3, 606), 100, t, 606);
  mcem::EmConfig cfg;
  cfg.max_em_iter = 15;
  cfg.seed = 606;
  const auto fit = mcem::fit(areas, t, {}, cfg);
  std::vector<Hyperparameters> path{fit.initial};
  for (const auto& p : fit.state.history) path.push_back(p);
  std::vector<eis::LogEstimate> ll;
  for (const auto& p : path) ll.push_back(mcem::marginal_loglik(areas, p, t, {}, 20000, 6060, 0));
  int worst_k = 0;
  double worst_z = kInf;
  for (std::size_t k = 0; k + 1 < ll.size(); ++k) {
    const double diff = ll[k + 1].value - ll[k].value;
    const double se = std::sqrt(ll[k].se * ll[k].se + ll[k + 1].se * ll[k + 1].se);
    const double z = diff / se;
    if (z < worst_z) {
      worst_z = z;
      worst_k = static_cast<int>(k);
    }
  }
  const bool ok = worst_z >= -2.0;
  return {ok, std::to_string(path.size() - 1) + " EM steps, loglik " + fmt("%.2f", ll.front().value) +
                  " -> " + fmt("%.2f", ll.back().value) + ", worst step " + std::to_string(worst_k) + "->" +
                  std::to_string(worst_k + 1) + " at " + fmt("%.2f", worst_z) + " SE (limit -2), " +
                  fmt("%.0f", clock.seconds()) + " s"};
}

// Nine classes for the recovery and simulation runs.
const Thresholds& nine_classes() {
  static const Thresholds t({2, 3, 4, 5, 6, 8, 10, 14});
  return t;
}

// Reduced Monte Carlo sizes for the repeated fits of criteria 7 and 8.
mcem::EmConfig repeated_fit_config() {
  mcem::EmConfig cfg;
  cfg.s0 = 100;
  cfg.s1 = 1000;
  cfg.s2 = 50;
  cfg.window_h = 10;
  cfg.window_d = 3;
  cfg.max_em_iter = 150;
  return cfg;
}

// 7. beta recovery over 20 seeded fits.
Outcome criterion_07() {
  Stopwatch clock;
  const auto psi_true = sim::synthetic_truth();
  const auto xs = sim::synthetic_covariates(200, 3, 707);
  const int fits = 20;
  std::vector<Eigen::VectorXd> betas;
  int converged = 0;
  for (int r = 0; r < fits; ++r) {
    const auto seed = static_cast<std::uint64_t>(7000 + r);
    const auto areas = simulate_areas(psi_true, xs, 200, nine_classes(), seed);
    auto cfg = repeated_fit_config();
    cfg.seed = seed;
    cfg.threads = 0;
    const auto fit = mcem::fit(areas, nine_classes(), {}, cfg);
    converged += fit.converged ? 1 : 0;
    betas.push_back(fit.psi.beta);
  }
  // Bonferroni over the three coefficients: two-sided 95% joint coverage.
  const double z = 2.394;
  bool ok = true;
  std::string detail;
  for (int j = 0; j < 3; ++j) {
    double mean = 0.0;
    for (const auto& b : betas) mean += b[j];
    mean /= fits;
    double var = 0.0;
    for (const auto& b : betas) var += (b[j] - mean) * (b[j] - mean);
    const double sd = std::sqrt(var / (fits - 1));
    const bool in = std::abs(psi_true.beta[j] - mean) <= z * sd;
    ok = ok && in;
    detail += "beta" + std::to_string(j) + " " + fmt("%.4f", mean) + " +/- " + fmt("%.4f", z * sd) +
              " vs " + fmt("%.4f", psi_true.beta[j]) + (in ? "" : " (outside)") + "; ";
  }
  const double secs = clock.seconds();
  ok = ok && secs < 1800.0;
  return {ok, detail + std::to_string(converged) + "/20 converged, " + fmt("%.0f", secs) + " s (limit 1800 s)"};
}

// 8. Desk-scale model-based simulation at G = 5 and G = 9.
Outcome criterion_08() {
  Stopwatch clock;
  std::map<int, sim::SimOutput> runs;
  for (const auto& t : {Thresholds({3, 5, 7, 10}), nine_classes()}) {
    sim::ModelBasedConfig cfg{.m = 40, .pop_size = 300, .n_pattern = {10, 50, 100, 150, 200},
                              .thresholds = t, .psi_true = sim::synthetic_truth()};
    cfg.R = 30;
    cfg.seed = 808;
    cfg.em = repeated_fit_config();
    cfg.gibbs = {500, 50, false};
    cfg.threads = 0;
    runs.emplace(t.groups(), sim::simulate_model_based(cfg));
  }
  bool ok = true;
  std::string detail;
  std::map<int, double> median_eb;
  for (const auto& [G, out] : runs) {
    std::map<int, std::pair<double, double>> block;
    std::map<int, int> count;
    int wins = 0;
    std::vector<double> eb;
    for (const auto& row : out.rows) {
      block[row.n].first += row.rrmse_eb;
      block[row.n].second += row.rrmse_naive;
      ++count[row.n];
      wins += row.rrmse_eb <= row.rrmse_naive ? 1 : 0;
      eb.push_back(row.rrmse_eb);
    }
    bool dec_eb = true;
    bool dec_naive = true;
    double prev_eb = kInf;
    double prev_naive = kInf;
    std::string means;
    for (const auto& [n, sums] : block) {
      const double e = sums.first / count[n];
      const double v = sums.second / count[n];
      dec_eb = dec_eb && e < prev_eb;
      dec_naive = dec_naive && v < prev_naive;
      prev_eb = e;
      prev_naive = v;
      means += fmt("%.4f", e) + "/" + fmt("%.4f", v) + " ";
    }
    std::sort(eb.begin(), eb.end());
    median_eb[G] = 0.5 * (eb[eb.size() / 2 - 1] + eb[eb.size() / 2]);
    const double share = static_cast<double>(wins) / static_cast<double>(out.rows.size());
    const bool pass_g = dec_eb && dec_naive && share >= 0.9;
    ok = ok && pass_g;
    detail += "G=" + std::to_string(G) + ": block EB/naive " + means + "(a " + (dec_eb && dec_naive ? "ok" : "FAIL") +
              "), EB<=naive " + std::to_string(wins) + "/" + std::to_string(out.rows.size()) + " (b " +
              (share >= 0.9 ? "ok" : "FAIL") + "), " + std::to_string(out.converged_fits) + "/" +
              std::to_string(out.fits) + " fits converged; ";
  }
  const bool finer = median_eb[9] <= median_eb[5];
  ok = ok && finer;
  const double secs = clock.seconds();
  const bool fast = secs < 3600.0;
  ok = ok && fast;
  detail += "median EB G=9 " + fmt("%.4f", median_eb[9]) + " vs G=5 " + fmt("%.4f", median_eb[5]) + " (c " +
            (finer ? "ok" : "FAIL") + "), " + fmt("%.0f", secs) + " s on " + std::to_string(cores()) +
            " core(s) (limit 3600 s on 8 cores)";
  return {ok, detail};
}

// 9. Naive sensitivity to the top-class midpoint on the bundled fixture.
Outcome criterion_09() {
  const Thresholds t({3, 5, 7, 10});
  const auto areas = io::load_areas(std::string(GSAE_DATA_DIR) + "/example_areas.csv", t);
  FittedModel model{t, {}, sim::synthetic_truth()};
  PredictConfig cfg{{500, 50, true}, 909, 0, std::nullopt};
  const auto base = predict_all(areas, model, cfg);
  const baseline::Midpoints mid(t);
  cfg.naive_cg = 2.0 * mid[4];
  const auto doubled = predict_all(areas, model, cfg);
  std::size_t top = 0;
  for (std::size_t i = 0; i < areas.size(); ++i) {
    if (areas[i].id == "A06") top = i;
  }
  const double shift = std::abs(doubled[top].mean_naive - base[top].mean_naive) / base[top].mean_naive;
  bool eb_same = true;
  for (std::size_t i = 0; i < base.size(); ++i) {
    eb_same = eb_same && base[i].eb.mean_eb == doubled[i].eb.mean_eb && std::isfinite(base[i].eb.mean_eb);
    eb_same = eb_same && (std::isnan(base[i].eb.gini_eb) ? std::isnan(doubled[i].eb.gini_eb)
                                                        : base[i].eb.gini_eb == doubled[i].eb.gini_eb);
  }
  return {shift > 0.10 && eb_same, "A06 naive " + fmt("%.4f", base[top].mean_naive) + " -> " +
                                       fmt("%.4f", doubled[top].mean_naive) + " (" + fmt("%.1f", 100 * shift) +
                                       "%, limit > 10%) with cbar_G " + fmt("%.1f", mid[4]) + " -> " +
                                       fmt("%.1f", 2 * mid[4]) + "; EB estimates bitwise equal: " +
                                       (eb_same ? "yes" : "no")};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 10. Every CLI command twice with the same seed.
Outcome criterion_10() {
  const fs::path dir = fs::temp_directory_path() / "gsae_acceptance_10";
  fs::remove_all(dir);
  const std::string cli = GSAE_CLI_PATH;
  const std::string data = std::string(GSAE_DATA_DIR) + "/example_areas.csv";
  const std::string em = " --s0 50 --s1 500 --s2 50 --window-h 3 --window-d 2 --max-iter 8";
  bool ok = true;
  std::string detail;
  std::vector<std::string> outputs;
  for (const char* run : {"a", "b"}) {
    const fs::path d = dir / run;
    fs::create_directories(d);
    const auto p = [&](const char* f) { return (d / f).string(); };
    const std::vector<std::string> cmds = {
        "fit --data " + data + " --thresholds 3,5,7,10 --out " + p("model.json") + " --ess " + p("ess.csv") +
            " --seed 42 --no-meta" + em,
        "predict --model " + p("model.json") + " --data " + data + " --out " + p("pred.csv") +
            " --gibbs-iters 200 --burnin 20 --seed 42",
        "bootstrap --model " + p("model.json") + " --data " + data + " --out " + p("rmse.csv") +
            " --B 5 --gibbs-iters 100 --burnin 10 --seed 42",
        "simulate model-based --m 6 --pop-size 100 --n-pattern 10,40 --thresholds 3,5,7,10 --R 2 --out " +
            p("mb.csv") + " --gibbs-iters 100 --burnin 10 --seed 42" + em,
        "gen-population --domains 5 --units 60 --pop-size 100 --out-units " + p("units.csv") +
            " --out-covariates " + p("domains.csv") + " --seed 42",
        "simulate design-based --population " + p("units.csv") + " --covariates " + p("domains.csv") +
            " --n 15 --thresholds 3,5,7,10 --R 2 --out " + p("db.csv") + " --gibbs-iters 100 --burnin 10 --seed 42" +
            em,
    };
    for (const auto& c : cmds) {
      const std::string full = cli + " " + c + " > /dev/null 2>> " + p("stderr.txt");
      const int status = std::system(full.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        ok = false;
        detail += "command failed: " + c.substr(0, c.find(' ')) + "; ";
      }
    }
  }
  int files = 0;
  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    const auto name = entry.path().filename();
    if (name == "stderr.txt") continue;
    ++files;
    const auto a = slurp(entry.path());
    const auto b = slurp(dir / "b" / name);
    if (a.empty() || a != b) {
      ok = false;
      detail += name.string() + " differs; ";
    }
  }
  fs::remove_all(dir);
  return {ok && files == 9, detail + std::to_string(files) + " output files from 6 commands compared byte for byte"};
}

struct Criterion {
  const char* id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {"01", "group_probs_oracle", criterion_01},       {"02", "multinomial_pmf_oracle", criterion_02},
    {"03", "gls_eis_oracle", criterion_03},           {"04", "gibbs_validity", criterion_04},
    {"05", "gini_equivalence", criterion_05},         {"06", "em_ascent", criterion_06},
    {"07", "parameter_recovery", criterion_07},       {"08", "model_based_simulation", criterion_08},
    {"09", "naive_sensitivity", criterion_09},        {"10", "cli_determinism", criterion_10},
};

}  // namespace

int main(int argc, char** argv) {
  const std::string only = argc > 1 ? argv[1] : "";
  int failures = 0;
  bool matched = false;
  for (const auto& c : kCriteria) {
    if (!only.empty() && only != c.id) continue;
    matched = true;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << ": " << o.detail << std::endl;
    failures += o.pass ? 0 : 1;
  }
  if (!matched) {
    std::cerr << "unknown criterion '" << only << "'\n";
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
