#ifndef GSAE_MCEM_HPP
#define GSAE_MCEM_HPP

#include "gsae/datamodel.hpp"
#include "gsae/eis.hpp"
#include "gsae/optimize.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gsae::mcem {

struct EmConfig {
  int s0 = 100;
  int s1 = 10000;
  int s2 = 500;
  int window_h = 30;
  int window_d = 5;
  double delta = 1e-3;
  double epsilon = 1e-3;
  int max_em_iter = 200;
  std::uint64_t seed = 1;
  int threads = 0;

  int eis_max_iter = 50;
  double eis_tolerance = 1e-3;
  // Start each area's EIS from its proposal of the previous EM iteration
  // instead of the prior.
  bool eis_warm_start = false;

  // Regress log(sigma2_hat) instead of sigma2_hat for the initial gamma.
  bool init_gamma_log = false;
  // Hold kappa at this value throughout.
  std::optional<double> fixed_kappa;

  NelderMeadOptions m_step_optimizer{};

  // Throws ValidationError on inconsistent settings.
  void validate() const;
  eis::EisOptions eis_options() const;
};

// Maximum-likelihood fit of h_kappa(z) ~ N(beta, sigma2) to one area.
struct LocalFit {
  double beta = 0.0;
  double kappa = 0.0;
  double sigma2 = 1.0;
  bool ok = false;
};

LocalFit local_mle(const GroupedSample& y, const Thresholds& thresholds,
                   const ModelOptions& options = {});

// V_i = n_i^{-1} sum_g log(cbar_g) y_ig.
double log_midpoint_mean(const GroupedSample& y, const Thresholds& thresholds);

struct InitialValues {
  Hyperparameters psi;
  std::vector<LocalFit> local;
  std::vector<std::string> warnings;
};

// Starting point for MCEM from the midpoint regression and per-area local
// fits. `areas` must all be in-sample. Throws ValidationError when X'X is
// singular.
InitialValues initial_values(std::span<const AreaRecord> areas, const Thresholds& thresholds,
                             const ModelOptions& options = {}, const EmConfig& config = {});

struct EStepResult {
  // S2 resampled draws per in-sample area.
  std::vector<std::vector<RandomEffects>> draws;
  // ESS / S1 per area.
  std::vector<double> ess_ratio;
  std::vector<eis::ProposalParams> proposals;
};

// EIS fit then SIR for every area; area i at EM iteration k draws from the
// streams (kEisFit, i, k) and (kSir, i, k).
EStepResult e_step(const Hyperparameters& psi, int iteration, std::span<const AreaRecord> areas,
                   const Thresholds& thresholds, const ModelOptions& options,
                   const EmConfig& config,
                   std::span<const eis::ProposalParams> warm_start = {});

// Mean of b^2 over all areas and draws.
double tau2_update(const EStepResult& e);

// Monte Carlo average of sum_i log f(y_i | u_i) at (beta, kappa), without the
// multinomial coefficients.
double beta_kappa_objective(const Eigen::VectorXd& beta, double kappa, const EStepResult& e,
                            std::span<const AreaRecord> areas, const Thresholds& thresholds,
                            const ModelOptions& options);

struct BetaKappa {
  Eigen::VectorXd beta;
  double kappa = 0.0;
};

BetaKappa maximize_beta_kappa(const EStepResult& e, std::span<const AreaRecord> areas,
                              const Thresholds& thresholds, const ModelOptions& options,
                              const BetaKappa& start, std::optional<double> fixed_kappa,
                              const NelderMeadOptions& optimizer = {});

// Per-area Monte Carlo means of log(sigma2) and 1/sigma2, the sufficient
// statistics of the inverse-gamma objective.
struct SigmaStats {
  double mean_log = 0.0;
  double mean_inv = 0.0;
};

std::vector<SigmaStats> sigma_stats(const EStepResult& e);

// Sum over areas of the expected log IG(sigma2; lambda/2 + 1, lambda*phi_i/2).
double gamma_lambda_objective(const Eigen::VectorXd& gamma, double lambda,
                              std::span<const SigmaStats> stats, std::span<const AreaRecord> areas);

struct GammaLambda {
  Eigen::VectorXd gamma;
  double lambda = 1.0;
};

// Simplex search over (gamma, log lambda); lambda is held when `fixed_lambda`
// is set.
GammaLambda maximize_gamma_lambda(std::span<const SigmaStats> stats,
                                  std::span<const AreaRecord> areas, const GammaLambda& start,
                                  std::optional<double> fixed_lambda = std::nullopt,
                                  const NelderMeadOptions& optimizer = {});

Hyperparameters m_step(const EStepResult& e, std::span<const AreaRecord> areas,
                       const Hyperparameters& previous, const Thresholds& thresholds,
                       const ModelOptions& options, const EmConfig& config);

struct ConvergenceCheck {
  bool evaluated = false;
  bool converged = false;
  // Relative windowed change per block, in kBlockNames order.
  std::array<double, 5> e_k{};
  // Mean of the last H iterates.
  Hyperparameters windowed;
};

// Windowed-mean rule over the iterates psi^(1..k). Not evaluated while
// k <= H + d.
ConvergenceCheck check_convergence(std::span<const Hyperparameters> history,
                                   const EmConfig& config);

// Mean of the last `window` iterates (all of them when fewer exist).
Hyperparameters windowed_mean(std::span<const Hyperparameters> history, int window);

struct EmState {
  Hyperparameters psi;
  int iter = 0;
  std::vector<Hyperparameters> history;
  // ESS / S1 per area, one row per iteration.
  std::vector<std::vector<double>> ess_trace;
};

struct FitResult {
  Hyperparameters psi;
  bool converged = false;
  int iterations = 0;
  Hyperparameters initial;
  std::vector<EmTraceEntry> trace;
  EmState state;
  std::vector<std::string> warnings;
  // Identifiers of the in-sample areas, the columns of state.ess_trace.
  std::vector<std::string> area_ids;
};

// Full MCEM: initial values, then E-step, M-step and the convergence check
// until the rule fires or max_em_iter is reached. Out-of-sample areas are
// ignored.
FitResult fit(std::span<const AreaRecord> areas, const Thresholds& thresholds,
              const ModelOptions& options, const EmConfig& config);

// Importance-sampling estimate of the marginal log-likelihood at psi using
// EIS proposals, with its Monte Carlo standard error.
eis::LogEstimate marginal_loglik(std::span<const AreaRecord> areas, const Hyperparameters& psi,
                                 const Thresholds& thresholds, const ModelOptions& options,
                                 int draws, std::uint64_t seed, int threads = 0);

}  // namespace gsae::mcem

#endif  // GSAE_MCEM_HPP
