#include "gsae/simulation.hpp"

#include "gsae/baseline.hpp"
#include "gsae/bootstrap.hpp"
#include "gsae/parallel.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <numeric>

namespace gsae::sim {

namespace {

std::uint64_t replicate_seed(std::uint64_t seed, int r) {
  return mix_seed(seed, Purpose::kLocalFit, 0, 1, static_cast<std::uint64_t>(r));
}

struct ReplicateScores {
  std::vector<double> eb;
  std::vector<double> naive;
  bool converged = false;
  std::vector<std::string> warnings;
};

// Fits psi to one replicate's grouped samples and returns EB and naive means.
ReplicateScores score_replicate(const std::vector<AreaRecord>& areas, const Thresholds& thresholds,
                                const ModelOptions& options, mcem::EmConfig em,
                                const eb::GibbsConfig& gibbs, std::optional<double> naive_cg,
                                std::uint64_t seed) {
  em.seed = seed;
  em.threads = 1;
  const auto fitted = mcem::fit(areas, thresholds, options, em);
  const baseline::Midpoints mid(thresholds, naive_cg);
  ReplicateScores out;
  out.converged = fitted.converged;
  out.warnings = fitted.warnings;
  out.eb.resize(areas.size());
  out.naive.resize(areas.size());
  for (std::size_t i = 0; i < areas.size(); ++i) {
    Rng rng = Rng::stream(seed, Purpose::kGibbs, i);
    out.eb[i] = eb::eb_estimate(areas[i], fitted.psi, thresholds, options, gibbs, rng).mean_eb;
    out.naive[i] = baseline::naive_mean(*areas[i].sample, mid);
  }
  return out;
}

SimOutput collect(const std::vector<ReplicateScores>& reps, const std::vector<std::vector<double>>& truths,
                  const std::vector<int>& n, int G) {
  SimOutput out;
  const std::size_t R = reps.size();
  const std::size_t m = n.size();
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> eb(R), naive(R), truth(R);
    for (std::size_t r = 0; r < R; ++r) {
      eb[r] = reps[r].eb[i];
      naive[r] = reps[r].naive[i];
      truth[r] = truths[r][i];
    }
    out.rows.push_back({static_cast<int>(i) + 1, n[i], rrmse(eb, truth), rrmse(naive, truth), G,
                        static_cast<int>(R)});
  }
  out.fits = static_cast<int>(R);
  for (std::size_t r = 0; r < R; ++r) {
    if (reps[r].converged) ++out.converged_fits;
    for (const auto& w : reps[r].warnings) {
      out.warnings.push_back("replicate " + std::to_string(r + 1) + ": " + w);
    }
  }
  return out;
}

}  // namespace

double rrmse(std::span<const double> estimates, std::span<const double> truths) {
  if (estimates.empty() || estimates.size() != truths.size()) {
    throw ValidationError("rrmse: need matching non-empty vectors");
  }
  double acc = 0.0;
  for (std::size_t r = 0; r < estimates.size(); ++r) {
    const double rel = (estimates[r] - truths[r]) / truths[r];
    acc += rel * rel;
  }
  return std::sqrt(acc / static_cast<double>(estimates.size()));
}

Hyperparameters synthetic_truth() {
  Hyperparameters psi;
  psi.beta = Eigen::Vector3d(1.6, 0.15, -0.1);
  psi.tau2 = 0.05;
  psi.lambda = 20.0;
  psi.kappa = 0.2;
  psi.gamma = Eigen::Vector3d(-0.5, 0.1, -0.05);
  return psi;
}

std::vector<int> sample_size_pattern(int m, std::span<const int> pattern) {
  if (m < 1 || pattern.empty()) throw ValidationError("sample_size_pattern: empty design");
  std::vector<int> n(static_cast<std::size_t>(m));
  const auto K = static_cast<long>(pattern.size());
  for (long i = 0; i < m; ++i) n[static_cast<std::size_t>(i)] = pattern[static_cast<std::size_t>(i * K / m)];
  return n;
}

std::vector<Eigen::VectorXd> synthetic_covariates(int m, int p, std::uint64_t seed) {
  if (p < 1) throw ValidationError("synthetic_covariates: p must be positive");
  std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    Rng rng = Rng::stream(seed, Purpose::kCovariates, static_cast<std::uint64_t>(i));
    Eigen::VectorXd x(p);
    x[0] = 1.0;
    for (int k = 1; k < p; ++k) x[k] = rng.normal();
    xs[static_cast<std::size_t>(i)] = x;
  }
  return xs;
}

SimOutput simulate_model_based(const ModelBasedConfig& config) {
  if (config.R < 1 || config.m < 1 || config.pop_size < 1) {
    throw ValidationError("simulate_model_based: m, R and N_pop must be positive");
  }
  validate(config.psi_true);
  config.em.validate();
  config.gibbs.validate();
  const auto n = sample_size_pattern(config.m, config.n_pattern);
  for (int v : n) {
    if (v < 1 || v > config.pop_size) throw ValidationError("simulate_model_based: n outside [1, N_pop]");
  }
  const auto xs = config.covariates.empty()
                      ? synthetic_covariates(config.m, config.psi_true.p(), config.seed)
                      : config.covariates;
  if (xs.size() != static_cast<std::size_t>(config.m)) {
    throw ValidationError("simulate_model_based: covariate count does not match m");
  }

  const auto R = static_cast<std::size_t>(config.R);
  std::vector<ReplicateScores> reps(R);
  std::vector<std::vector<double>> truths(R);
  parallel_for(R, config.threads, [&](std::size_t r) {
    std::vector<AreaRecord> areas(static_cast<std::size_t>(config.m));
    truths[r].resize(areas.size());
    for (std::size_t i = 0; i < areas.size(); ++i) {
      auto& a = areas[i];
      a.id = std::to_string(i + 1);
      a.x = xs[i];
      a.pop_size = config.pop_size;
      Rng rng = Rng::stream(config.seed, Purpose::kPopulation, i, 0, r);
      long clamped = 0;
      const auto z = bootstrap::generate_population(a, config.psi_true, config.options, rng, clamped);
      truths[r][i] = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
      a.sample = bootstrap::group_first_n(z, n[i], config.thresholds);
    }
    reps[r] = score_replicate(areas, config.thresholds, config.options, config.em, config.gibbs,
                              config.naive_cg, replicate_seed(config.seed, static_cast<int>(r)));
  });
  return collect(reps, truths, n, config.thresholds.groups());
}

std::vector<std::vector<double>> build_population(std::span<const UnitValue> units,
                                                  std::span<const AreaRecord> domains,
                                                  std::uint64_t seed) {
  std::map<std::string, std::size_t> index;
  for (std::size_t d = 0; d < domains.size(); ++d) {
    if (!index.emplace(domains[d].id, d).second) {
      throw ValidationError("build_population: duplicate domain '" + domains[d].id + "'");
    }
  }
  std::vector<std::vector<double>> source(domains.size());
  for (const auto& u : units) {
    const auto it = index.find(u.domain_id);
    if (it == index.end()) {
      throw ValidationError("build_population: missing covariates for domain '" + u.domain_id + "'");
    }
    if (!std::isfinite(u.value)) throw ValidationError("build_population: non-finite unit value");
    source[it->second].push_back(u.value);
  }
  std::vector<std::vector<double>> pop(domains.size());
  for (std::size_t d = 0; d < domains.size(); ++d) {
    if (source[d].empty()) {
      throw ValidationError("build_population: domain '" + domains[d].id + "' has no units");
    }
    if (domains[d].pop_size < 1) throw ValidationError("build_population: N_pop must be positive");
    Rng rng = Rng::stream(seed, Purpose::kPopulation, d);
    pop[d].resize(static_cast<std::size_t>(domains[d].pop_size));
    for (double& v : pop[d]) v = source[d][rng.below(source[d].size())];
  }
  return pop;
}

std::uint64_t population_hash(std::span<const std::vector<double>> population) {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](const unsigned char* p, std::size_t len) {
    for (std::size_t k = 0; k < len; ++k) {
      h ^= p[k];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& domain : population) {
    const std::uint64_t size = domain.size();
    mix(reinterpret_cast<const unsigned char*>(&size), sizeof size);
    mix(reinterpret_cast<const unsigned char*>(domain.data()), domain.size() * sizeof(double));
  }
  return h;
}

std::vector<std::size_t> srswor(std::size_t N, std::size_t n, Rng& rng) {
  if (n > N) throw ValidationError("srswor: sample size exceeds population size");
  std::vector<std::size_t> idx(N);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = k + rng.below(N - k);
    std::swap(idx[k], idx[j]);
  }
  idx.resize(n);
  return idx;
}

SimOutput simulate_design_based(std::span<const UnitValue> units,
                                std::span<const AreaRecord> domains,
                                const DesignBasedConfig& config) {
  if (config.R < 1) throw ValidationError("simulate_design_based: R must be positive");
  config.em.validate();
  config.gibbs.validate();
  const std::size_t D = domains.size();
  if (D == 0) throw ValidationError("simulate_design_based: no domains");
  std::vector<int> n(D);
  if (config.n_per_domain.size() == 1) {
    std::fill(n.begin(), n.end(), config.n_per_domain[0]);
  } else if (config.n_per_domain.size() == D) {
    n = config.n_per_domain;
  } else {
    throw ValidationError("simulate_design_based: need one sample size or one per domain");
  }
  for (std::size_t d = 0; d < D; ++d) {
    if (n[d] < 1 || n[d] > domains[d].pop_size) {
      throw ValidationError("simulate_design_based: sample size exceeds population in domain '" +
                            domains[d].id + "'");
    }
  }
  const auto pop = build_population(units, domains, config.seed);
  std::vector<double> truth(D);
  for (std::size_t d = 0; d < D; ++d) {
    truth[d] = std::accumulate(pop[d].begin(), pop[d].end(), 0.0) / static_cast<double>(pop[d].size());
  }
  for (const auto& v : pop) {
    for (double z : v) {
      if (!(z > config.shift)) throw ValidationError("simulate_design_based: shift must lie below every value");
    }
  }
  ModelOptions options;
  options.shift = config.shift;

  const auto R = static_cast<std::size_t>(config.R);
  std::vector<ReplicateScores> reps(R);
  parallel_for(R, config.threads, [&](std::size_t r) {
    std::vector<AreaRecord> areas(domains.begin(), domains.end());
    for (std::size_t d = 0; d < D; ++d) {
      Rng rng = Rng::stream(config.seed, Purpose::kSampling, d, 0, r);
      const auto idx = srswor(pop[d].size(), static_cast<std::size_t>(n[d]), rng);
      std::vector<double> s(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) s[k] = pop[d][idx[k]];
      areas[d].sample = bootstrap::group_values(s, config.thresholds);
    }
    reps[r] = score_replicate(areas, config.thresholds, options, config.em, config.gibbs,
                              config.naive_cg, replicate_seed(config.seed, static_cast<int>(r)));
  });
  return collect(reps, std::vector<std::vector<double>>(R, truth), n, config.thresholds.groups());
}

SyntheticPopulation synthetic_population(int domains, int units_per_domain, long pop_size,
                                         std::uint64_t seed) {
  if (domains < 1 || units_per_domain < 1 || pop_size < 1) {
    throw ValidationError("synthetic_population: sizes must be positive");
  }
  SyntheticPopulation out;
  const auto xs = synthetic_covariates(domains, 3, seed);
  for (int d = 0; d < domains; ++d) {
    AreaRecord a;
    a.id = "D" + std::to_string(d + 1);
    a.x = xs[static_cast<std::size_t>(d)];
    a.pop_size = pop_size;
    Rng rng = Rng::stream(seed, Purpose::kPopulation, static_cast<std::uint64_t>(d), 1);
    const double loc = 1.6 + 0.3 * a.x[1] - 0.15 * a.x[2] + 0.2 * rng.normal();
    const double scale = 0.5 * std::exp(0.1 * a.x[2]);
    for (int k = 0; k < units_per_domain; ++k) {
      out.units.push_back({a.id, std::exp(loc + scale * rng.normal()) - 2.0});
    }
    out.domains.push_back(std::move(a));
  }
  return out;
}

}  // namespace gsae::sim
