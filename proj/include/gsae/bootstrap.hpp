#ifndef GSAE_BOOTSTRAP_HPP
#define GSAE_BOOTSTRAP_HPP

#include "gsae/datamodel.hpp"
#include "gsae/eb.hpp"
#include "gsae/random.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gsae::bootstrap {

// N_pop unit values of one area generated at psi: (b, sigma2) from the
// priors, latent values from N(x'beta + b, sigma2) kept inside the transform
// range, then mapped back to the original scale.
std::vector<double> generate_population(const AreaRecord& area, const Hyperparameters& psi,
                                        const ModelOptions& options, Rng& rng, long& clamped);

// Grouped counts of the first n values.
GroupedSample group_first_n(std::span<const double> z, int n, const Thresholds& thresholds);

// Grouped counts of all values.
GroupedSample group_values(std::span<const double> z, const Thresholds& thresholds);

// sqrt(mean(e^2)).
double rmse(std::span<const double> errors);

// Delta-method standard error of rmse(errors) over the replicates.
double rmse_se(std::span<const double> errors);

struct BootstrapConfig {
  int B = 100;
  eb::GibbsConfig gibbs{};
  std::uint64_t seed = 1;
  int threads = 0;
  std::optional<double> naive_cg;
};

struct AreaRmse {
  std::string area_id;
  // 0 for out-of-sample areas.
  int n = 0;
  double rmse_eb = 0.0;
  // NaN for out-of-sample areas.
  double rmse_naive = 0.0;
  double rmse_gini_eb = 0.0;
  double se_eb = 0.0;
  double se_naive = 0.0;
  int B = 0;
};

// Parametric bootstrap at a fixed psi. Replicate r of area i draws its
// population from stream (kBootstrap, i, 0, r) and its Gibbs chain from
// (kBootstrap, i, 1, r).
std::vector<AreaRmse> bootstrap_rmse(std::span<const AreaRecord> areas, const Hyperparameters& psi,
                                     const Thresholds& thresholds, const ModelOptions& options,
                                     const BootstrapConfig& config);

}  // namespace gsae::bootstrap

#endif  // GSAE_BOOTSTRAP_HPP
