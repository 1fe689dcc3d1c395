#include "gsae/mcem.hpp"

#include "gsae/baseline.hpp"
#include "gsae/likelihood.hpp"
#include "gsae/parallel.hpp"
#include "gsae/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gsae::mcem {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kKappaBound = 3.0;

void require_in_sample(std::span<const AreaRecord> areas, const char* where) {
  if (areas.empty()) throw ValidationError(std::string(where) + ": no in-sample areas");
  for (const auto& a : areas) {
    if (!a.in_sample()) {
      throw ValidationError(std::string(where) + ": area '" + a.id + "' has no sample");
    }
  }
}

// Type-7 sample quantile.
double quantile(std::vector<double> v, double q) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Least-squares coefficients of rhs on the rows of X; minimum-norm when the
// rows do not determine them.
Eigen::VectorXd least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& rhs) {
  return X.completeOrthogonalDecomposition().solve(rhs);
}

double block_distance(const Hyperparameters& a, const Hyperparameters& b, int block) {
  switch (block) {
    case 0: return (a.beta - b.beta).norm();
    case 1: return std::abs(a.tau2 - b.tau2);
    case 2: return std::abs(a.kappa - b.kappa);
    case 3: return std::abs(a.lambda - b.lambda);
    default: return (a.gamma - b.gamma).norm();
  }
}

double block_norm(const Hyperparameters& a, int block) {
  switch (block) {
    case 0: return a.beta.norm();
    case 1: return std::abs(a.tau2);
    case 2: return std::abs(a.kappa);
    case 3: return std::abs(a.lambda);
    default: return a.gamma.norm();
  }
}

}  // namespace

void EmConfig::validate() const {
  if (s0 < 10) throw ValidationError("EmConfig: s0 must be at least 10");
  if (s2 < 1 || s1 < s2) throw ValidationError("EmConfig: need s1 >= s2 >= 1");
  if (window_h < 1 || window_d < 1) throw ValidationError("EmConfig: H and d must be at least 1");
  if (!(delta > 0.0) || !(epsilon > 0.0)) {
    throw ValidationError("EmConfig: delta and epsilon must be positive");
  }
  if (max_em_iter < 1) throw ValidationError("EmConfig: max_em_iter must be at least 1");
  if (eis_max_iter < 1 || !(eis_tolerance > 0.0)) {
    throw ValidationError("EmConfig: invalid EIS settings");
  }
  if (fixed_kappa && !std::isfinite(*fixed_kappa)) {
    throw ValidationError("EmConfig: fixed kappa must be finite");
  }
}

eis::EisOptions EmConfig::eis_options() const {
  eis::EisOptions o;
  o.s0 = s0;
  o.max_iter = eis_max_iter;
  o.tolerance = eis_tolerance;
  return o;
}

double log_midpoint_mean(const GroupedSample& y, const Thresholds& thresholds) {
  if (y.n() == 0) throw ValidationError("log_midpoint_mean: empty sample");
  const baseline::Midpoints mid(thresholds);
  double acc = 0.0;
  for (int g = 0; g < y.groups(); ++g) acc += std::log(mid[g]) * y.count(g);
  return acc / y.n();
}

namespace {

// Log-midpoints on the shifted scale, log(cbar_g - C).
std::vector<double> shifted_log_midpoints(const Thresholds& thresholds, double shift) {
  const baseline::Midpoints mid(thresholds);
  std::vector<double> out(mid.values().size());
  for (std::size_t g = 0; g < out.size(); ++g) {
    const double d = mid.values()[g] - shift;
    if (!(d > 0.0)) throw ValidationError("initial values: class midpoint not above the shift");
    out[g] = std::log(d);
  }
  return out;
}

}  // namespace

LocalFit local_mle(const GroupedSample& y, const Thresholds& thresholds,
                   const ModelOptions& options) {
  LocalFit out;
  if (y.n() == 0) return out;
  const auto lm = shifted_log_midpoints(thresholds, options.shift);
  double mean = 0.0;
  for (int g = 0; g < y.groups(); ++g) mean += lm[static_cast<std::size_t>(g)] * y.count(g);
  mean /= y.n();
  double var = 0.0;
  for (int g = 0; g < y.groups(); ++g) {
    const double d = lm[static_cast<std::size_t>(g)] - mean;
    var += d * d * y.count(g);
  }
  var /= y.n();
  if (!(var > 0.0)) var = 1.0;

  auto objective = [&](const Eigen::VectorXd& t) {
    const double kappa = t[1];
    if (!(std::abs(kappa) < kKappaBound)) return kInf;
    const auto bounds = BoxCox(kappa, options.shift).transformed_boundaries(thresholds);
    const double sigma = std::exp(0.5 * t[2]);
    return -log_pmf_from_boundaries(y, t[0], sigma, bounds, options.renormalize_groups, false);
  };
  Eigen::VectorXd x0(3);
  x0 << mean, 0.0, std::log(var);
  auto res = nelder_mead_minimize(objective, x0);
  // One restart from the best vertex guards against a collapsed simplex.
  res = nelder_mead_minimize(objective, res.x);
  out.beta = res.x[0];
  out.kappa = res.x[1];
  out.sigma2 = std::exp(res.x[2]);
  out.ok = std::isfinite(res.value) && res.x.allFinite() &&
           std::abs(out.kappa) < kKappaBound - 1e-6 && out.sigma2 > 1e-10 && out.sigma2 < 1e10;
  return out;
}

InitialValues initial_values(std::span<const AreaRecord> areas, const Thresholds& thresholds,
                             const ModelOptions& options, const EmConfig& config) {
  require_in_sample(areas, "initial_values");
  const auto m = static_cast<Eigen::Index>(areas.size());
  const Eigen::MatrixXd X = design_matrix(areas);
  const Eigen::Index p = X.cols();
  InitialValues out;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < p) throw ValidationError("initial_values: X'X is singular");

  const auto lm = shifted_log_midpoints(thresholds, options.shift);
  Eigen::VectorXd V(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& y = *areas[static_cast<std::size_t>(i)].sample;
    if (y.n() == 0) throw ValidationError("initial_values: area '" + areas[static_cast<std::size_t>(i)].id + "' has n = 0");
    double acc = 0.0;
    for (int g = 0; g < y.groups(); ++g) acc += lm[static_cast<std::size_t>(g)] * y.count(g);
    V[i] = acc / y.n();
  }
  Hyperparameters& psi = out.psi;
  psi.beta = qr.solve(V);
  psi.tau2 = (V - X * psi.beta).squaredNorm() / static_cast<double>(m);
  if (!(psi.tau2 > 1e-8)) {
    out.warnings.push_back("initial tau2 is zero; using 0.01");
    psi.tau2 = 0.01;
  }

  out.local.resize(areas.size());
  std::vector<Eigen::Index> valid;
  parallel_for(areas.size(), config.threads, [&](std::size_t i) {
    if (areas[i].sample->n() >= 3) out.local[i] = local_mle(*areas[i].sample, thresholds, options);
  });
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& a = areas[static_cast<std::size_t>(i)];
    if (out.local[static_cast<std::size_t>(i)].ok) {
      valid.push_back(i);
    } else if (a.sample->n() >= 3) {
      out.warnings.push_back("local fit failed for area '" + a.id + "'");
    }
  }

  double mean_s2 = 0.0;
  double mean_kappa = 0.0;
  for (auto i : valid) {
    mean_s2 += out.local[static_cast<std::size_t>(i)].sigma2;
    mean_kappa += out.local[static_cast<std::size_t>(i)].kappa;
  }
  if (!valid.empty()) {
    mean_s2 /= static_cast<double>(valid.size());
    mean_kappa /= static_cast<double>(valid.size());
  }
  double var_s2 = 0.0;
  for (auto i : valid) {
    const double d = out.local[static_cast<std::size_t>(i)].sigma2 - mean_s2;
    var_s2 += d * d;
  }
  if (!valid.empty()) var_s2 /= static_cast<double>(valid.size());

  if (valid.size() >= 2 && var_s2 > 0.0) {
    psi.lambda = 2.0 * (mean_s2 * mean_s2 / var_s2 + 1.0);
  } else {
    out.warnings.push_back("too few local fits for the lambda moment; using 10");
    psi.lambda = 10.0;
  }
  if (valid.empty()) out.warnings.push_back("no local fit succeeded; kappa starts at 0");
  psi.kappa = config.fixed_kappa.value_or(valid.empty() ? 0.0 : mean_kappa);

  psi.gamma = Eigen::VectorXd::Zero(p);
  if (!valid.empty()) {
    // Areas too small for a local fit inherit the cross-area mean.
    std::vector<Eigen::Index> rows = valid;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (areas[static_cast<std::size_t>(i)].sample->n() < 3) rows.push_back(i);
    }
    std::sort(rows.begin(), rows.end());
    Eigen::MatrixXd Xv(static_cast<Eigen::Index>(rows.size()), p);
    Eigen::VectorXd s2(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto i = rows[r];
      Xv.row(static_cast<Eigen::Index>(r)) = X.row(i);
      const auto& lf = out.local[static_cast<std::size_t>(i)];
      s2[static_cast<Eigen::Index>(r)] = lf.ok ? lf.sigma2 : mean_s2;
    }
    const Eigen::VectorXd log_s2 = s2.array().log().matrix();
    psi.gamma = least_squares(Xv, config.init_gamma_log ? log_s2 : s2);
    // The raw-scale regression feeds a log link, so one outlying local fit can
    // put phi many orders of magnitude away from every local variance.
    const Eigen::ArrayXd phi = (X * psi.gamma).array().exp();
    const bool wild = !phi.allFinite() || (phi < 1e-3 * s2.minCoeff()).any() ||
                      (phi > 1e3 * s2.maxCoeff()).any();
    if (!config.init_gamma_log && wild) {
      out.warnings.push_back("initial gamma puts phi far outside the local variances; regressing log sigma2");
      psi.gamma = least_squares(Xv, log_s2);
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!std::isfinite(psi.phi(X.row(i).transpose()))) {
      out.warnings.push_back("initial gamma gives non-finite phi; using gamma = 0");
      psi.gamma.setZero();
      break;
    }
  }
  validate(psi);
  return out;
}

EStepResult e_step(const Hyperparameters& psi, int iteration, std::span<const AreaRecord> areas,
                   const Thresholds& thresholds, const ModelOptions& options,
                   const EmConfig& config, std::span<const eis::ProposalParams> warm_start) {
  require_in_sample(areas, "e_step");
  const auto bounds = BoxCox(psi.kappa, options.shift).transformed_boundaries(thresholds);
  const auto eis_opts = config.eis_options();
  const bool warm = config.eis_warm_start && warm_start.size() == areas.size();
  EStepResult out;
  out.draws.resize(areas.size());
  out.ess_ratio.resize(areas.size());
  out.proposals.resize(areas.size());
  const auto k = static_cast<std::uint64_t>(iteration);
  parallel_for(areas.size(), config.threads, [&](std::size_t i) {
    const eis::AreaTarget target{*areas[i].sample, areas[i].x, psi, bounds,
                                 options.renormalize_groups};
    Rng eis_rng = Rng::stream(config.seed, Purpose::kEisFit, i, k);
    std::optional<eis::ProposalParams> start;
    if (warm) start = warm_start[i];
    const auto fitted = eis::eis_fit(target, eis_rng, eis_opts, start);
    Rng sir_rng = Rng::stream(config.seed, Purpose::kSir, i, k);
    try {
      auto s = eis::sir(target, fitted.proposal, config.s1, config.s2, sir_rng);
      out.draws[i] = std::move(s.resampled);
      out.ess_ratio[i] = s.diagnostics.ess / config.s1;
    } catch (const NumericalError& e) {
      throw NumericalError("e_step: area '" + areas[i].id + "': " + e.what());
    }
    out.proposals[i] = fitted.proposal;
  });
  return out;
}

double tau2_update(const EStepResult& e) {
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& area : e.draws) {
    for (const auto& u : area) acc += u.b * u.b;
    count += area.size();
  }
  if (count == 0) throw ValidationError("tau2_update: no draws");
  return acc / static_cast<double>(count);
}

double beta_kappa_objective(const Eigen::VectorXd& beta, double kappa, const EStepResult& e,
                            std::span<const AreaRecord> areas, const Thresholds& thresholds,
                            const ModelOptions& options) {
  const auto bounds = BoxCox(kappa, options.shift).transformed_boundaries(thresholds);
  double total = 0.0;
  for (std::size_t i = 0; i < areas.size(); ++i) {
    const double xb = areas[i].x.dot(beta);
    const auto& draws = e.draws[i];
    double acc = 0.0;
    for (const auto& u : draws) {
      acc += log_pmf_from_boundaries(*areas[i].sample, xb + u.b, std::sqrt(u.sigma2), bounds,
                                     options.renormalize_groups, false);
    }
    total += acc / static_cast<double>(draws.size());
  }
  return total;
}

BetaKappa maximize_beta_kappa(const EStepResult& e, std::span<const AreaRecord> areas,
                              const Thresholds& thresholds, const ModelOptions& options,
                              const BetaKappa& start, std::optional<double> fixed_kappa,
                              const NelderMeadOptions& optimizer) {
  const auto p = start.beta.size();
  const bool free_kappa = !fixed_kappa.has_value();
  Eigen::VectorXd x0(p + (free_kappa ? 1 : 0));
  x0.head(p) = start.beta;
  if (free_kappa) x0[p] = start.kappa;
  auto unpack_kappa = [&](const Eigen::VectorXd& t) {
    return free_kappa ? t[p] : *fixed_kappa;
  };
  auto objective = [&](const Eigen::VectorXd& t) {
    const double kappa = unpack_kappa(t);
    if (!(std::abs(kappa) < kKappaBound)) return kInf;
    return -beta_kappa_objective(t.head(p), kappa, e, areas, thresholds, options);
  };
  if (!std::isfinite(objective(x0))) {
    throw NumericalError("m_step: (beta, kappa) objective is not finite at the previous iterate");
  }
  const auto res = nelder_mead_minimize(objective, x0, optimizer);
  return {res.x.head(p), unpack_kappa(res.x)};
}

std::vector<SigmaStats> sigma_stats(const EStepResult& e) {
  std::vector<SigmaStats> out(e.draws.size());
  for (std::size_t i = 0; i < e.draws.size(); ++i) {
    const auto& draws = e.draws[i];
    for (const auto& u : draws) {
      out[i].mean_log += std::log(u.sigma2);
      out[i].mean_inv += 1.0 / u.sigma2;
    }
    out[i].mean_log /= static_cast<double>(draws.size());
    out[i].mean_inv /= static_cast<double>(draws.size());
  }
  return out;
}

double gamma_lambda_objective(const Eigen::VectorXd& gamma, double lambda,
                              std::span<const SigmaStats> stats, std::span<const AreaRecord> areas) {
  const double shape = 0.5 * lambda + 1.0;
  const double lg = std::lgamma(shape);
  double total = 0.0;
  for (std::size_t i = 0; i < areas.size(); ++i) {
    const double eta = areas[i].x.dot(gamma);
    const double scale = 0.5 * lambda * std::exp(eta);
    total += shape * (std::log(0.5 * lambda) + eta) - lg - (shape + 1.0) * stats[i].mean_log -
             scale * stats[i].mean_inv;
  }
  return total;
}

GammaLambda maximize_gamma_lambda(std::span<const SigmaStats> stats,
                                  std::span<const AreaRecord> areas, const GammaLambda& start,
                                  std::optional<double> fixed_lambda,
                                  const NelderMeadOptions& optimizer) {
  const auto p = start.gamma.size();
  const bool free_lambda = !fixed_lambda.has_value();
  Eigen::VectorXd x0(p + (free_lambda ? 1 : 0));
  x0.head(p) = start.gamma;
  if (free_lambda) x0[p] = std::log(start.lambda);
  auto unpack_lambda = [&](const Eigen::VectorXd& t) {
    return free_lambda ? std::exp(t[p]) : *fixed_lambda;
  };
  auto objective = [&](const Eigen::VectorXd& t) {
    return -gamma_lambda_objective(t.head(p), unpack_lambda(t), stats, areas);
  };
  if (!std::isfinite(objective(x0))) {
    throw NumericalError("m_step: (gamma, lambda) objective is not finite at the previous iterate");
  }
  const auto res = nelder_mead_minimize(objective, x0, optimizer);
  return {res.x.head(p), unpack_lambda(res.x)};
}

Hyperparameters m_step(const EStepResult& e, std::span<const AreaRecord> areas,
                       const Hyperparameters& previous, const Thresholds& thresholds,
                       const ModelOptions& options, const EmConfig& config) {
  Hyperparameters next;
  next.tau2 = tau2_update(e);
  const auto bk = maximize_beta_kappa(e, areas, thresholds, options,
                                      {previous.beta, previous.kappa}, config.fixed_kappa,
                                      config.m_step_optimizer);
  next.beta = bk.beta;
  next.kappa = bk.kappa;
  const auto stats = sigma_stats(e);
  const auto gl = maximize_gamma_lambda(stats, areas, {previous.gamma, previous.lambda},
                                        std::nullopt, config.m_step_optimizer);
  next.gamma = gl.gamma;
  next.lambda = gl.lambda;
  validate(next);
  return next;
}

Hyperparameters windowed_mean(std::span<const Hyperparameters> history, int window) {
  if (history.empty()) throw ValidationError("windowed_mean: empty history");
  const std::size_t w = std::min<std::size_t>(history.size(), static_cast<std::size_t>(std::max(window, 1)));
  const auto first = history.end() - static_cast<std::ptrdiff_t>(w);
  Hyperparameters out;
  out.beta = Eigen::VectorXd::Zero(first->beta.size());
  out.gamma = Eigen::VectorXd::Zero(first->gamma.size());
  out.tau2 = 0.0;
  out.lambda = 0.0;
  out.kappa = 0.0;
  for (auto it = first; it != history.end(); ++it) {
    out.beta += it->beta;
    out.gamma += it->gamma;
    out.tau2 += it->tau2;
    out.lambda += it->lambda;
    out.kappa += it->kappa;
  }
  const double inv = 1.0 / static_cast<double>(w);
  out.beta *= inv;
  out.gamma *= inv;
  out.tau2 *= inv;
  out.lambda *= inv;
  out.kappa *= inv;
  return out;
}

ConvergenceCheck check_convergence(std::span<const Hyperparameters> history,
                                   const EmConfig& config) {
  ConvergenceCheck out;
  out.e_k.fill(kNaN);
  const auto k = history.size();
  const auto H = static_cast<std::size_t>(config.window_h);
  const auto d = static_cast<std::size_t>(config.window_d);
  if (k == 0) return out;
  out.windowed = windowed_mean(history, config.window_h);
  if (k <= H + d) return out;
  const auto lagged = windowed_mean(history.first(k - d), config.window_h);
  out.evaluated = true;
  double worst = 0.0;
  for (int b = 0; b < 5; ++b) {
    out.e_k[static_cast<std::size_t>(b)] =
        block_distance(out.windowed, lagged, b) / (block_norm(lagged, b) + config.delta);
    worst = std::max(worst, out.e_k[static_cast<std::size_t>(b)]);
  }
  out.converged = worst < config.epsilon;
  return out;
}

FitResult fit(std::span<const AreaRecord> all_areas, const Thresholds& thresholds,
              const ModelOptions& options, const EmConfig& config) {
  config.validate();
  validate_areas(all_areas, thresholds);
  const auto areas = in_sample_areas(all_areas);
  if (areas.empty()) throw ValidationError("fit: no in-sample areas");

  FitResult out;
  for (const auto& a : areas) out.area_ids.push_back(a.id);
  auto init = initial_values(areas, thresholds, options, config);
  out.initial = init.psi;
  out.warnings = std::move(init.warnings);

  EmState& state = out.state;
  state.psi = init.psi;
  std::vector<eis::ProposalParams> proposals;
  ConvergenceCheck check;
  for (int k = 1; k <= config.max_em_iter; ++k) {
    const auto e = e_step(state.psi, k, areas, thresholds, options, config, proposals);
    state.psi = m_step(e, areas, state.psi, thresholds, options, config);
    state.iter = k;
    state.history.push_back(state.psi);
    state.ess_trace.push_back(e.ess_ratio);
    proposals = e.proposals;

    check = check_convergence(state.history, config);
    EmTraceEntry entry;
    entry.iter = k;
    entry.psi = state.psi;
    entry.e_k = check.e_k;
    entry.ess_q10 = quantile(e.ess_ratio, 0.1);
    entry.ess_q50 = quantile(e.ess_ratio, 0.5);
    entry.ess_q90 = quantile(e.ess_ratio, 0.9);
    out.trace.push_back(std::move(entry));
    if (check.converged) break;
  }
  out.iterations = state.iter;
  out.converged = check.converged;
  out.psi = check.windowed;
  if (!out.converged) {
    out.warnings.push_back("MCEM did not converge within " + std::to_string(config.max_em_iter) +
                           " iterations; returning the windowed mean");
  }
  validate(out.psi, areas);
  return out;
}

eis::LogEstimate marginal_loglik(std::span<const AreaRecord> all_areas, const Hyperparameters& psi,
                                 const Thresholds& thresholds, const ModelOptions& options,
                                 int draws, std::uint64_t seed, int threads) {
  if (draws < 2) throw ValidationError("marginal_loglik: need at least 2 draws");
  const auto areas = in_sample_areas(all_areas);
  const auto bounds = BoxCox(psi.kappa, options.shift).transformed_boundaries(thresholds);
  std::vector<eis::LogEstimate> parts(areas.size());
  parallel_for(areas.size(), threads, [&](std::size_t i) {
    const eis::AreaTarget target{*areas[i].sample, areas[i].x, psi, bounds,
                                 options.renormalize_groups};
    Rng fit_rng = Rng::stream(seed, Purpose::kMarginalLik, i, 0);
    const auto q = eis::eis_fit(target, fit_rng).proposal;
    Rng is_rng = Rng::stream(seed, Purpose::kMarginalLik, i, 1);
    parts[i] = eis::log_marginal_is(target, q, draws, is_rng);
  });
  eis::LogEstimate total;
  double var = 0.0;
  for (const auto& part : parts) {
    total.value += part.value;
    var += part.se * part.se;
  }
  total.se = std::sqrt(var);
  return total;
}

}  // namespace gsae::mcem
