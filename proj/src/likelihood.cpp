#include "gsae/likelihood.hpp"

#include "gsae/transform.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <limits>
#include <numbers>

namespace gsae {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kHalfLog2Pi = 0.91893853320467274178;

// One erfc per boundary: the lower-tail cdf when z <= 0, the survival
// function otherwise. Differences of same-side values never cancel.
struct TailValue {
  double value;
  bool upper;
};

TailValue tail_value(double z) {
  if (z <= 0.0) return {0.5 * std::erfc(-z * kInvSqrt2), false};
  return {0.5 * std::erfc(z * kInvSqrt2), true};
}

double interval_from_tails(const TailValue& lo, const TailValue& hi) {
  double p;
  if (!hi.upper) {
    p = hi.value - lo.value;
  } else if (lo.upper) {
    p = lo.value - hi.value;
  } else {
    p = 1.0 - lo.value - hi.value;
  }
  return p > 0.0 ? p : 0.0;
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

double normal_sf(double z) { return 0.5 * std::erfc(z * kInvSqrt2); }

double normal_quantile(double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double normal_interval_prob(double a, double b) {
  if (!(b > a)) return 0.0;
  return interval_from_tails(tail_value(a), tail_value(b));
}

double log_normal_density(double x, double mean, double var) {
  const double d = x - mean;
  return -kHalfLog2Pi - 0.5 * std::log(var) - 0.5 * d * d / var;
}

double log_inverse_gamma_density(double x, double shape, double scale) {
  if (!(x > 0.0)) return -kInf;
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double GroupProbs::total() const {
  double s = 0.0;
  for (double p : probs) s += p;
  return s;
}

void group_probs_from_boundaries(double mu, double sigma, std::span<const double> boundaries,
                                 bool renormalize, std::span<double> out) {
  const std::size_t G = boundaries.size() - 1;
  TailValue lo = tail_value((boundaries[0] - mu) / sigma);
  const TailValue bottom = lo;
  for (std::size_t g = 0; g < G; ++g) {
    const TailValue hi = tail_value((boundaries[g + 1] - mu) / sigma);
    out[g] = interval_from_tails(lo, hi);
    lo = hi;
  }
  if (renormalize) {
    const double mass = interval_from_tails(bottom, lo);
    if (mass > 0.0) {
      for (std::size_t g = 0; g < G; ++g) out[g] /= mass;
    }
  }
}

GroupProbs group_probs(double mu, double sigma2, double kappa, const Thresholds& thresholds,
                       const ModelOptions& options) {
  if (!std::isfinite(mu)) throw ValidationError("group_probs: non-finite mu");
  if (!(sigma2 > 0.0)) throw ValidationError("group_probs: sigma2 must be positive");
  const auto bounds = BoxCox(kappa, options.shift).transformed_boundaries(thresholds);
  GroupProbs gp;
  gp.probs.resize(static_cast<std::size_t>(thresholds.groups()));
  group_probs_from_boundaries(mu, std::sqrt(sigma2), bounds, options.renormalize_groups, gp.probs);
  return gp;
}

double log_pmf_from_boundaries(const GroupedSample& y, double mu, double sigma,
                               std::span<const double> boundaries, bool renormalize,
                               bool include_coef) {
  if (y.n() == 0) return 0.0;
  const int G = y.groups();
  double acc = include_coef ? y.log_multinomial_coef() : 0.0;
  double mass = 1.0;
  TailValue lo = tail_value((boundaries[0] - mu) / sigma);
  const TailValue bottom = lo;
  for (int g = 0; g < G; ++g) {
    const TailValue hi = tail_value((boundaries[static_cast<std::size_t>(g) + 1] - mu) / sigma);
    const int c = y.count(g);
    if (c > 0) {
      const double p = interval_from_tails(lo, hi);
      if (p <= 0.0) return -kInf;
      acc += c * std::log(p);
    }
    lo = hi;
  }
  if (renormalize) {
    mass = interval_from_tails(bottom, lo);
    if (mass <= 0.0) return -kInf;
    acc -= y.n() * std::log(mass);
  }
  return acc;
}

double log_pmf(const GroupedSample& y, double mu, double sigma2, double kappa,
               const Thresholds& thresholds, const ModelOptions& options) {
  if (!(sigma2 > 0.0)) throw ValidationError("log_pmf: sigma2 must be positive");
  if (y.groups() != thresholds.groups()) {
    throw ValidationError("log_pmf: count arity does not match thresholds");
  }
  const auto bounds = BoxCox(kappa, options.shift).transformed_boundaries(thresholds);
  return log_pmf_from_boundaries(y, mu, std::sqrt(sigma2), bounds, options.renormalize_groups);
}

double log_prior_u(const RandomEffects& u, const Hyperparameters& psi, const Eigen::VectorXd& x) {
  return log_normal_density(u.b, 0.0, psi.tau2) +
         log_inverse_gamma_density(u.sigma2, psi.sigma2_shape(), psi.sigma2_scale(x));
}

double complete_loglik(std::span<const AreaRecord> areas, std::span<const RandomEffects> u,
                       const Hyperparameters& psi, const Thresholds& thresholds,
                       const ModelOptions& options) {
  const auto bounds = BoxCox(psi.kappa, options.shift).transformed_boundaries(thresholds);
  double total = 0.0;
  std::size_t k = 0;
  for (const auto& a : areas) {
    if (!a.sample) continue;
    if (k >= u.size()) throw ValidationError("complete_loglik: fewer random effects than areas");
    const auto& ui = u[k++];
    const double mu = psi.linear_mean(a.x) + ui.b;
    total += log_pmf_from_boundaries(*a.sample, mu, std::sqrt(ui.sigma2), bounds,
                                     options.renormalize_groups) +
             log_prior_u(ui, psi, a.x);
  }
  if (k != u.size()) throw ValidationError("complete_loglik: more random effects than areas");
  return total;
}

}  // namespace gsae
