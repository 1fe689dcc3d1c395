#ifndef GSAE_LIKELIHOOD_HPP
#define GSAE_LIKELIHOOD_HPP

#include "gsae/datamodel.hpp"

#include <span>
#include <vector>

namespace gsae {

// Standard normal distribution. The cdf and survival function are computed
// through erfc on the side that avoids cancellation, so tail probabilities
// stay positive down to |z| ~ 37.
double normal_cdf(double z);
double normal_sf(double z);
double normal_quantile(double p);

// P(a <= Z < b) for a standard normal Z, accurate when both ends sit in the
// same tail. Infinite ends are allowed.
double normal_interval_prob(double a, double b);

double log_normal_density(double x, double mean, double var);
double log_inverse_gamma_density(double x, double shape, double scale);

struct GroupProbs {
  std::vector<double> probs;

  // Mass inside the transform range; below 1 when kappa != 0.
  double total() const;
};

// probs[g] = Phi((h(c_g) - mu)/sigma) - Phi((h(c_{g-1}) - mu)/sigma).
GroupProbs group_probs(double mu, double sigma2, double kappa, const Thresholds& thresholds,
                       const ModelOptions& options = {});

// Same computation against precomputed transformed boundaries h(c_0..c_G).
void group_probs_from_boundaries(double mu, double sigma, std::span<const double> boundaries,
                                 bool renormalize, std::span<double> out);

// Multinomial log-pmf log f(y | mu, sigma2). -inf when an observed class has
// zero probability.
double log_pmf(const GroupedSample& y, double mu, double sigma2, double kappa,
               const Thresholds& thresholds, const ModelOptions& options = {});

// Hot-path variant. `include_coef` adds log(n!/prod y_g!).
double log_pmf_from_boundaries(const GroupedSample& y, double mu, double sigma,
                               std::span<const double> boundaries, bool renormalize,
                               bool include_coef = true);

// log N(b; 0, tau2) + log IG(sigma2; lambda/2 + 1, lambda*phi/2).
double log_prior_u(const RandomEffects& u, const Hyperparameters& psi, const Eigen::VectorXd& x);

// Sum over in-sample areas of log f(y_i | u_i) + log pi(u_i). `u` holds one
// entry per in-sample area, in order.
double complete_loglik(std::span<const AreaRecord> areas, std::span<const RandomEffects> u,
                       const Hyperparameters& psi, const Thresholds& thresholds,
                       const ModelOptions& options = {});

}  // namespace gsae

#endif  // GSAE_LIKELIHOOD_HPP
