#ifndef GSAE_EIS_HPP
#define GSAE_EIS_HPP

#include "gsae/datamodel.hpp"
#include "gsae/random.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace gsae::eis {

// Proposal N(theta1, theta2) x IG(theta3, theta4) for u = (b, sigma2). Its
// log-kernel is a1 b + a2 b^2 + a3 log(sigma2) + a4 / sigma2 with
// a = (theta1/theta2, -1/(2 theta2), -(theta3 + 1), -theta4).
struct ProposalParams {
  double theta1 = 0.0;
  double theta2 = 1.0;
  double theta3 = 2.0;
  double theta4 = 1.0;

  bool valid() const;
  std::array<double, 4> natural() const;
  // nullopt unless a2 < 0, a3 < -1 and a4 < 0.
  static std::optional<ProposalParams> from_natural(const std::array<double, 4>& a);
  // The random-effects prior N(0, tau2) x IG(lambda/2 + 1, lambda*phi/2).
  static ProposalParams prior(const Hyperparameters& psi, const Eigen::VectorXd& x);

  double log_density(const RandomEffects& u) const;
  RandomEffects draw(Rng& rng) const;
};

struct EisOptions {
  int s0 = 100;
  int max_iter = 50;
  double tolerance = 1e-3;
  int max_halvings = 10;
  // Below this Kish ESS of the regression weights the step is taken with
  // uniform weights.
  double min_weight_ess = 10.0;
};

struct EisResult {
  ProposalParams proposal;
  int iterations = 0;
  bool converged = false;
  int singular_steps = 0;
  int damped_steps = 0;
  int unweighted_steps = 0;
  // The regression solved at the final iteration, kept for diagnostics.
  Eigen::MatrixXd design;
  Eigen::VectorXd response;
  Eigen::VectorXd weights;
  // True when the final proposal is the undamped GLS solution of that system.
  bool final_step_plain = false;
};

// Regressor matrix [1, b, b^2, log sigma2, 1/sigma2], one row per draw.
Eigen::MatrixXd eis_design(std::span<const RandomEffects> draws);

// Weighted least squares (Z' D Z)^{-1} Z' D f through a pivoted QR of
// sqrt(D) Z. Rows with zero weight are ignored. nullopt when rank deficient.
std::optional<Eigen::VectorXd> gls_solve(const Eigen::MatrixXd& Z, const Eigen::VectorXd& f,
                                         const Eigen::VectorXd& w);

// Context shared by the EIS fit and SIR for one area.
struct AreaTarget {
  const GroupedSample& y;
  const Eigen::VectorXd& x;
  const Hyperparameters& psi;
  // h(c_0..c_G) at psi.kappa.
  std::span<const double> boundaries;
  bool renormalize = false;

  // log f(y | u) + log pi(u).
  double log_target(const RandomEffects& u) const;
};

// Iterated GLS fit of the proposal. The same underlying normal and uniform
// variates are reused at every iteration, so the map a^(t-1) -> a^(t) is
// deterministic and the relative-change rule can settle.
EisResult eis_fit(const AreaTarget& target, Rng& rng, const EisOptions& options = {},
                  std::optional<ProposalParams> start = std::nullopt);

struct WeightedDraws {
  std::vector<RandomEffects> draws;
  std::vector<double> log_weights;
  double ess = 0.0;
};

struct SirResult {
  std::vector<RandomEffects> resampled;
  WeightedDraws diagnostics;
};

// exp(l - max l) normalised to sum to one. Throws NumericalError when every
// log-weight is -inf.
std::vector<double> normalized_weights(std::span<const double> log_weights);

// Kish effective sample size (sum w)^2 / sum w^2.
double kish_ess(std::span<const double> weights);

// Multinomial resampling of `count` indices with the given probabilities.
std::vector<std::size_t> resample_indices(std::span<const double> probs, std::size_t count,
                                          Rng& rng);

// Sampling importance resampling: s1 proposal draws, weights
// f(y|u) pi(u) / q(u), then s2 draws with replacement.
SirResult sir(const AreaTarget& target, const ProposalParams& proposal, int s1, int s2, Rng& rng);

struct LogEstimate {
  double value = 0.0;
  // Delta-method Monte Carlo standard error of `value`.
  double se = 0.0;
};

// Importance-sampling estimate of log of the integral of f(y|u) pi(u) du.
LogEstimate log_marginal_is(const AreaTarget& target, const ProposalParams& proposal, int draws,
                            Rng& rng);

}  // namespace gsae::eis

#endif  // GSAE_EIS_HPP
