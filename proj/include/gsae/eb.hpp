#ifndef GSAE_EB_HPP
#define GSAE_EB_HPP

#include "gsae/datamodel.hpp"
#include "gsae/random.hpp"
#include "gsae/transform.hpp"

#include <span>
#include <string>
#include <vector>

namespace gsae::eb {

// One Gibbs state for an in-sample area. v_in holds y_1 values of class 1,
// then y_2 values of class 2, and so on.
struct PosteriorDraw {
  double mu = 0.0;
  double sigma2 = 1.0;
  std::vector<double> v_in;
  std::vector<double> v_out;
};

struct GibbsConfig {
  int iterations = 500;
  int burnin = 50;
  // Skip the Gini average when only means are needed.
  bool compute_gini = true;

  void validate() const;
};

struct EbEstimate {
  std::string area_id;
  double mean_eb = 0.0;
  // NaN when no kept draw had a positive total.
  double gini_eb = 0.0;
  int draws_used = 0;
  // Latent values clamped to the transform range after failed redraws.
  long clamped_draws = 0;
};

// Draw from N(mu, sigma^2) restricted to [lo, hi). Inverse-CDF sampling in
// the central region, exponential or uniform rejection more than five
// standard deviations into a tail. Throws NumericalError when the interval
// is empty or the sampler cannot place a draw.
double truncated_normal(double mu, double sigma, double lo, double hi, Rng& rng);

// Draws v ~ N(mu, sigma^2) that the inverse transform can map back. Values
// outside the range are redrawn up to 100 times, then clamped 1e-8 inside
// the boundary, which increments `clamped`.
double draw_in_range(double mu, double sigma, const BoxCox& h, Rng& rng, long& clamped);

// Everything a chain needs about one area, computed once.
struct AreaChain {
  const AreaRecord& area;
  const Hyperparameters& psi;
  BoxCox h;
  // h(c_0..c_G).
  std::vector<double> bounds;
  // Class index of each v_in entry.
  std::vector<int> group_of;
  long out_count = 0;

  AreaChain(const AreaRecord& area, const Hyperparameters& psi, const Thresholds& thresholds,
            const ModelOptions& options);
};

struct NormalParams {
  double mean = 0.0;
  double var = 1.0;
};

struct InverseGammaParams {
  double shape = 1.0;
  double scale = 1.0;
};

// mu | rest ~ N((sigma2 x'beta + N tau2 vbar) / (sigma2 + N tau2),
//              tau2 sigma2 / (sigma2 + N tau2)), vbar the mean of N values.
NormalParams mu_conditional(double linear_mean, double tau2, double sigma2, double N, double vbar);

// sigma2 | rest ~ IG((N + lambda)/2 + 1, (lambda phi + ss) / 2), ss the sum of
// squared deviations of the N values from mu.
InverseGammaParams sigma2_conditional(double lambda, double phi, double N, double ss);

// mu0 = x'beta, sigma2_0 = phi, v_in at the transformed class midpoints
// (open ends placed one sigma0 beyond the finite boundary), v_out = mu0.
PosteriorDraw initial_draw(const AreaChain& chain);

// One sweep in the order mu, v_in, v_out, sigma2, updating `state` in place.
void gibbs_update(PosteriorDraw& state, const AreaChain& chain, Rng& rng, long& clamped);

PosteriorDraw gibbs_step(const PosteriorDraw& current, const AreaChain& chain, Rng& rng);

// EB mean and Gini of an in-sample area from `iterations` kept sweeps after
// `burnin` discarded ones.
EbEstimate eb_estimate(const AreaRecord& area, const Hyperparameters& psi,
                       const Thresholds& thresholds, const ModelOptions& options,
                       const GibbsConfig& config, Rng& rng);

// Monte Carlo prediction for an area without a sample: `draws` populations
// generated from the priors at psi.
EbEstimate predict_out_of_sample(const AreaRecord& area, const Hyperparameters& psi,
                                 const Thresholds& thresholds, const ModelOptions& options,
                                 int draws, bool compute_gini, Rng& rng);

}  // namespace gsae::eb

#endif  // GSAE_EB_HPP
