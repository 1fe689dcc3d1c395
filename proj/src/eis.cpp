#include "gsae/eis.hpp"

#include "gsae/likelihood.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gsae::eis {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double theta_distance(const ProposalParams& a, const ProposalParams& b) {
  const double d1 = a.theta1 - b.theta1;
  const double d2 = a.theta2 - b.theta2;
  const double d3 = a.theta3 - b.theta3;
  const double d4 = a.theta4 - b.theta4;
  return std::sqrt(d1 * d1 + d2 * d2 + d3 * d3 + d4 * d4);
}

double theta_norm(const ProposalParams& a) {
  return std::sqrt(a.theta1 * a.theta1 + a.theta2 * a.theta2 + a.theta3 * a.theta3 +
                   a.theta4 * a.theta4);
}

}  // namespace

bool ProposalParams::valid() const {
  return std::isfinite(theta1) && theta2 > 0.0 && theta3 > 0.0 && theta4 > 0.0 &&
         std::isfinite(theta2) && std::isfinite(theta3) && std::isfinite(theta4);
}

std::array<double, 4> ProposalParams::natural() const {
  return {theta1 / theta2, -0.5 / theta2, -(theta3 + 1.0), -theta4};
}

std::optional<ProposalParams> ProposalParams::from_natural(const std::array<double, 4>& a) {
  if (!(a[1] < 0.0) || !(a[2] < -1.0) || !(a[3] < 0.0) || !std::isfinite(a[0])) {
    return std::nullopt;
  }
  ProposalParams q{-a[0] / (2.0 * a[1]), -1.0 / (2.0 * a[1]), -a[2] - 1.0, -a[3]};
  if (!q.valid()) return std::nullopt;
  return q;
}

ProposalParams ProposalParams::prior(const Hyperparameters& psi, const Eigen::VectorXd& x) {
  return {0.0, psi.tau2, psi.sigma2_shape(), psi.sigma2_scale(x)};
}

double ProposalParams::log_density(const RandomEffects& u) const {
  return log_normal_density(u.b, theta1, theta2) +
         log_inverse_gamma_density(u.sigma2, theta3, theta4);
}

RandomEffects ProposalParams::draw(Rng& rng) const {
  RandomEffects u;
  u.b = theta1 + std::sqrt(theta2) * rng.normal();
  u.sigma2 = rng.inverse_gamma(theta3, theta4);
  return u;
}

double AreaTarget::log_target(const RandomEffects& u) const {
  const double mu = psi.linear_mean(x) + u.b;
  return log_pmf_from_boundaries(y, mu, std::sqrt(u.sigma2), boundaries, renormalize) +
         log_prior_u(u, psi, x);
}

Eigen::MatrixXd eis_design(std::span<const RandomEffects> draws) {
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(draws.size()), 5);
  for (std::size_t s = 0; s < draws.size(); ++s) {
    const auto r = static_cast<Eigen::Index>(s);
    Z(r, 0) = 1.0;
    Z(r, 1) = draws[s].b;
    Z(r, 2) = draws[s].b * draws[s].b;
    Z(r, 3) = std::log(draws[s].sigma2);
    Z(r, 4) = 1.0 / draws[s].sigma2;
  }
  return Z;
}

std::optional<Eigen::VectorXd> gls_solve(const Eigen::MatrixXd& Z, const Eigen::VectorXd& f,
                                         const Eigen::VectorXd& w) {
  std::vector<Eigen::Index> rows;
  rows.reserve(static_cast<std::size_t>(Z.rows()));
  for (Eigen::Index r = 0; r < Z.rows(); ++r) {
    if (w[r] > 0.0 && std::isfinite(w[r]) && std::isfinite(f[r]) && Z.row(r).allFinite()) {
      rows.push_back(r);
    }
  }
  if (rows.size() < static_cast<std::size_t>(Z.cols())) return std::nullopt;
  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), Z.cols());
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double sw = std::sqrt(w[rows[k]]);
    A.row(static_cast<Eigen::Index>(k)) = sw * Z.row(rows[k]);
    rhs[static_cast<Eigen::Index>(k)] = sw * f[rows[k]];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < Z.cols()) return std::nullopt;
  Eigen::VectorXd coef = qr.solve(rhs);
  if (!coef.allFinite()) return std::nullopt;
  return coef;
}

EisResult eis_fit(const AreaTarget& target, Rng& rng, const EisOptions& options,
                  std::optional<ProposalParams> start) {
  if (options.s0 < 10) throw ValidationError("eis_fit: s0 must be at least 10");
  EisResult res;
  res.proposal = start.value_or(ProposalParams::prior(target.psi, target.x));

  const auto s0 = static_cast<std::size_t>(options.s0);
  std::vector<double> normals(s0);
  std::vector<double> uniforms(s0);
  for (std::size_t s = 0; s < s0; ++s) {
    normals[s] = rng.normal();
    uniforms[s] = rng.uniform();
  }

  std::vector<RandomEffects> draws(s0);
  Eigen::VectorXd f(static_cast<Eigen::Index>(s0));
  Eigen::VectorXd logw(static_cast<Eigen::Index>(s0));
  ProposalParams last_usable = res.proposal;
  for (int t = 1; t <= options.max_iter; ++t) {
    const ProposalParams& q = res.proposal;
    const double sd = std::sqrt(q.theta2);
    double max_logw = kNegInf;
    for (std::size_t s = 0; s < s0; ++s) {
      const auto r = static_cast<Eigen::Index>(s);
      draws[s].b = q.theta1 + sd * normals[s];
      draws[s].sigma2 = q.theta4 / boost::math::gamma_p_inv(q.theta3, uniforms[s]);
      f[r] = target.log_target(draws[s]);
      logw[r] = std::isfinite(f[r]) ? f[r] - q.log_density(draws[s]) : kNegInf;
      max_logw = std::max(max_logw, logw[r]);
    }
    if (!std::isfinite(max_logw)) {
      // Every draw missed the target support; the previous proposal did not.
      ++res.singular_steps;
      if (t > 1) {
        res.proposal = last_usable;
        res.final_step_plain = false;
      }
      break;
    }
    last_usable = q;
    Eigen::VectorXd w = (logw.array() - max_logw).exp().matrix();
    const Eigen::MatrixXd Z = eis_design(draws);
    // Weights concentrated on a handful of draws cannot identify five
    // coefficients; an unweighted step on the finite rows moves the proposal
    // into the posterior region first.
    std::optional<Eigen::VectorXd> coef;
    if (kish_ess(std::span<const double>(w.data(), s0)) >= options.min_weight_ess) {
      coef = gls_solve(Z, f, w);
    }
    if (!coef) {
      ++res.unweighted_steps;
      w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(s0));
      coef = gls_solve(Z, f, w);
    }
    if (!coef) {
      ++res.singular_steps;
      break;
    }

    const std::array<double, 4> a_hat{(*coef)[1], (*coef)[2], (*coef)[3], (*coef)[4]};
    auto next = ProposalParams::from_natural(a_hat);
    bool plain = next.has_value();
    if (!next) {
      ++res.damped_steps;
      const auto a_prev = q.natural();
      double scale = 1.0;
      for (int j = 0; j < options.max_halvings && !next; ++j) {
        scale *= 0.5;
        std::array<double, 4> a;
        for (std::size_t k = 0; k < 4; ++k) a[k] = a_prev[k] + scale * (a_hat[k] - a_prev[k]);
        next = ProposalParams::from_natural(a);
      }
    }
    res.iterations = t;
    res.design = Z;
    res.response = f;
    res.weights = w;
    res.final_step_plain = plain;
    if (!next) {
      // No valid step: the fixed variates would repeat it, so stop here.
      res.final_step_plain = false;
      break;
    }
    const double change = theta_distance(*next, q) / theta_norm(q);
    res.proposal = *next;
    if (change < options.tolerance) {
      res.converged = true;
      break;
    }
  }
  return res;
}

std::vector<double> normalized_weights(std::span<const double> log_weights) {
  double max_lw = kNegInf;
  for (double l : log_weights) {
    if (l > max_lw) max_lw = l;
  }
  if (!std::isfinite(max_lw)) {
    throw NumericalError("importance weights collapsed: every weight is zero");
  }
  std::vector<double> w(log_weights.size());
  double total = 0.0;
  for (std::size_t s = 0; s < w.size(); ++s) {
    w[s] = std::exp(log_weights[s] - max_lw);
    total += w[s];
  }
  for (double& v : w) v /= total;
  return w;
}

double kish_ess(std::span<const double> weights) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double v : weights) {
    sum += v;
    sum_sq += v * v;
  }
  return sum_sq > 0.0 ? sum * sum / sum_sq : 0.0;
}

std::vector<std::size_t> resample_indices(std::span<const double> probs, std::size_t count,
                                          Rng& rng) {
  std::vector<double> cdf(probs.size());
  double acc = 0.0;
  for (std::size_t s = 0; s < probs.size(); ++s) {
    acc += probs[s];
    cdf[s] = acc;
  }
  std::vector<std::size_t> idx(count);
  for (auto& k : idx) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    // Skip zero-probability entries that share the cumulative value.
    while (probs[static_cast<std::size_t>(it - cdf.begin())] <= 0.0 && it != cdf.begin()) --it;
    k = static_cast<std::size_t>(it - cdf.begin());
  }
  return idx;
}

SirResult sir(const AreaTarget& target, const ProposalParams& proposal, int s1, int s2, Rng& rng) {
  if (s2 < 1 || s1 < s2) throw ValidationError("sir: need s1 >= s2 >= 1");
  SirResult res;
  auto& diag = res.diagnostics;
  diag.draws.resize(static_cast<std::size_t>(s1));
  diag.log_weights.resize(static_cast<std::size_t>(s1));
  for (std::size_t s = 0; s < diag.draws.size(); ++s) {
    diag.draws[s] = proposal.draw(rng);
    const double lt = target.log_target(diag.draws[s]);
    diag.log_weights[s] = std::isfinite(lt) ? lt - proposal.log_density(diag.draws[s]) : kNegInf;
  }
  const auto probs = normalized_weights(diag.log_weights);
  diag.ess = kish_ess(probs);
  const auto idx = resample_indices(probs, static_cast<std::size_t>(s2), rng);
  res.resampled.reserve(idx.size());
  for (auto k : idx) res.resampled.push_back(diag.draws[k]);
  return res;
}

LogEstimate log_marginal_is(const AreaTarget& target, const ProposalParams& proposal, int draws,
                            Rng& rng) {
  std::vector<double> lw(static_cast<std::size_t>(draws));
  double max_lw = kNegInf;
  for (auto& l : lw) {
    const auto u = proposal.draw(rng);
    const double lt = target.log_target(u);
    l = std::isfinite(lt) ? lt - proposal.log_density(u) : kNegInf;
    max_lw = std::max(max_lw, l);
  }
  if (!std::isfinite(max_lw)) throw NumericalError("log_marginal_is: every weight is zero");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double l : lw) {
    const double w = std::exp(l - max_lw);
    sum += w;
    sum_sq += w * w;
  }
  const double S = static_cast<double>(draws);
  const double mean = sum / S;
  const double var = std::max(sum_sq / S - mean * mean, 0.0) * S / std::max(S - 1.0, 1.0);
  return {max_lw + std::log(mean), std::sqrt(var / S) / mean};
}

}  // namespace gsae::eis
