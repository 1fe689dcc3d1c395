#ifndef GSAE_SIMULATION_HPP
#define GSAE_SIMULATION_HPP

#include "gsae/datamodel.hpp"
#include "gsae/eb.hpp"
#include "gsae/mcem.hpp"
#include "gsae/random.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gsae::sim {

struct RrmseRow {
  int area_index = 0;
  int n = 0;
  double rrmse_eb = 0.0;
  double rrmse_naive = 0.0;
  int G = 0;
  int R = 0;
};

struct SimOutput {
  std::vector<RrmseRow> rows;
  int fits = 0;
  int converged_fits = 0;
  std::vector<std::string> warnings;
};

// sqrt(R^{-1} sum_r ((est_r - truth_r) / truth_r)^2).
double rrmse(std::span<const double> estimates, std::span<const double> truths);

// Synthetic true parameters for x = (1, x_2, x_3), used when no fitted model
// is supplied as the truth.
Hyperparameters synthetic_truth();

// Sample sizes in equal consecutive blocks: area i gets
// pattern[i * K / m] for K pattern entries.
std::vector<int> sample_size_pattern(int m, std::span<const int> pattern);

// x_i = (1, z_2, ..., z_p) with independent standard normal z, drawn from
// stream (kCovariates, i).
std::vector<Eigen::VectorXd> synthetic_covariates(int m, int p, std::uint64_t seed);

struct ModelBasedConfig {
  int m = 100;
  long pop_size = 1000;
  std::vector<int> n_pattern = {10, 50, 100, 150, 200};
  Thresholds thresholds;
  Hyperparameters psi_true;
  ModelOptions options{};
  int R = 100;
  std::uint64_t seed = 1;
  mcem::EmConfig em{};
  eb::GibbsConfig gibbs{500, 50, false};
  std::optional<double> naive_cg;
  int threads = 0;
  // Leave empty for synthetic_covariates.
  std::vector<Eigen::VectorXd> covariates;
};

// Replicate r draws area i's population from stream (kPopulation, i, 0, r),
// samples its first n_i units, refits psi and scores EB and naive means.
// Populations do not depend on the thresholds, so runs that differ only in
// G share them.
SimOutput simulate_model_based(const ModelBasedConfig& config);

struct UnitValue {
  std::string domain_id;
  double value = 0.0;
};

// One fixed population per domain, N_pop units resampled with replacement
// from that domain's units with stream (kPopulation, d).
std::vector<std::vector<double>> build_population(std::span<const UnitValue> units,
                                                  std::span<const AreaRecord> domains,
                                                  std::uint64_t seed);

// FNV-1a over the value bytes, domain by domain.
std::uint64_t population_hash(std::span<const std::vector<double>> population);

// n distinct indices from [0, N) in selection order.
std::vector<std::size_t> srswor(std::size_t N, std::size_t n, Rng& rng);

struct DesignBasedConfig {
  Thresholds thresholds;
  double shift = 0.0;
  // One entry per domain, or a single entry applied to every domain.
  std::vector<int> n_per_domain;
  int R = 100;
  std::uint64_t seed = 1;
  mcem::EmConfig em{};
  eb::GibbsConfig gibbs{500, 50, false};
  std::optional<double> naive_cg;
  int threads = 0;
};

// Fixed synthetic population, then R rounds of SRSWOR per domain (stream
// (kSampling, d, 0, r)), grouping, fitting and scoring against the true
// domain means.
SimOutput simulate_design_based(std::span<const UnitValue> units,
                                std::span<const AreaRecord> domains,
                                const DesignBasedConfig& config);

struct SyntheticPopulation {
  std::vector<UnitValue> units;
  // Domain covariates (1, x_2, x_3) and population sizes, without samples.
  std::vector<AreaRecord> domains;
};

// Skewed unit-level values with a negative lower tail, a stand-in for a real
// income file.
SyntheticPopulation synthetic_population(int domains, int units_per_domain, long pop_size,
                                         std::uint64_t seed);

}  // namespace gsae::sim

#endif  // GSAE_SIMULATION_HPP
