#include "gsae/bootstrap.hpp"

#include "gsae/baseline.hpp"
#include "gsae/parallel.hpp"
#include "gsae/transform.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace gsae::bootstrap {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

std::vector<double> generate_population(const AreaRecord& area, const Hyperparameters& psi,
                                        const ModelOptions& options, Rng& rng, long& clamped) {
  if (area.pop_size < 1) throw ValidationError("generate_population: N_pop must be positive");
  const BoxCox h(psi.kappa, options.shift);
  const double mu = psi.linear_mean(area.x) + std::sqrt(psi.tau2) * rng.normal();
  const double sigma = std::sqrt(rng.inverse_gamma(psi.sigma2_shape(), psi.sigma2_scale(area.x)));
  std::vector<double> z(static_cast<std::size_t>(area.pop_size));
  for (double& v : z) v = h.inverse_unchecked(eb::draw_in_range(mu, sigma, h, rng, clamped));
  return z;
}

GroupedSample group_first_n(std::span<const double> z, int n, const Thresholds& thresholds) {
  if (n < 0 || static_cast<std::size_t>(n) > z.size()) {
    throw ValidationError("group_first_n: sample size exceeds the population");
  }
  return group_values(z.first(static_cast<std::size_t>(n)), thresholds);
}

GroupedSample group_values(std::span<const double> z, const Thresholds& thresholds) {
  std::vector<int> counts(static_cast<std::size_t>(thresholds.groups()), 0);
  for (double v : z) ++counts[static_cast<std::size_t>(thresholds.classify(v))];
  return GroupedSample(std::move(counts));
}

double rmse(std::span<const double> errors) {
  if (errors.empty()) throw ValidationError("rmse: no errors");
  double acc = 0.0;
  for (double e : errors) acc += e * e;
  return std::sqrt(acc / static_cast<double>(errors.size()));
}

double rmse_se(std::span<const double> errors) {
  const auto B = static_cast<double>(errors.size());
  if (errors.size() < 2) return kNaN;
  double mse = 0.0;
  for (double e : errors) mse += e * e;
  mse /= B;
  double var = 0.0;
  for (double e : errors) var += (e * e - mse) * (e * e - mse);
  var /= B - 1.0;
  const double r = std::sqrt(mse);
  return r > 0.0 ? std::sqrt(var / B) / (2.0 * r) : 0.0;
}

std::vector<AreaRmse> bootstrap_rmse(std::span<const AreaRecord> areas, const Hyperparameters& psi,
                                     const Thresholds& thresholds, const ModelOptions& options,
                                     const BootstrapConfig& config) {
  if (config.B < 1) throw ValidationError("bootstrap: B must be at least 1");
  config.gibbs.validate();
  validate(psi, areas);
  const baseline::Midpoints mid(thresholds, config.naive_cg);
  const std::size_t m = areas.size();
  const auto B = static_cast<std::size_t>(config.B);
  std::vector<double> err_eb(m * B), err_naive(m * B), err_gini(m * B);

  parallel_for(m * B, config.threads, [&](std::size_t job) {
    const std::size_t i = job / B;
    const std::size_t r = job % B;
    const AreaRecord& area = areas[i];
    Rng pop_rng = Rng::stream(config.seed, Purpose::kBootstrap, i, 0, r);
    long clamped = 0;
    const auto z = generate_population(area, psi, options, pop_rng, clamped);
    const double total = std::accumulate(z.begin(), z.end(), 0.0);
    const double truth = total / static_cast<double>(z.size());
    const double truth_gini = config.gibbs.compute_gini && total > 0.0 ? baseline::gini(z) : kNaN;

    AreaRecord boot = area;
    Rng chain_rng = Rng::stream(config.seed, Purpose::kBootstrap, i, 1, r);
    eb::EbEstimate est;
    if (area.in_sample()) {
      boot.sample = group_first_n(z, area.sample->n(), thresholds);
      est = eb::eb_estimate(boot, psi, thresholds, options, config.gibbs, chain_rng);
      err_naive[job] = baseline::naive_mean(*boot.sample, mid) - truth;
    } else {
      est = eb::predict_out_of_sample(boot, psi, thresholds, options, config.gibbs.iterations,
                                      config.gibbs.compute_gini, chain_rng);
      err_naive[job] = kNaN;
    }
    err_eb[job] = est.mean_eb - truth;
    err_gini[job] = est.gini_eb - truth_gini;
  });

  std::vector<AreaRmse> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::span<const double> eb(err_eb.data() + i * B, B);
    const std::span<const double> nv(err_naive.data() + i * B, B);
    const std::span<const double> gi(err_gini.data() + i * B, B);
    auto& row = out[i];
    row.area_id = areas[i].id;
    row.n = areas[i].in_sample() ? areas[i].sample->n() : 0;
    row.B = config.B;
    row.rmse_eb = rmse(eb);
    row.se_eb = rmse_se(eb);
    row.rmse_gini_eb = rmse(gi);
    if (areas[i].in_sample()) {
      row.rmse_naive = rmse(nv);
      row.se_naive = rmse_se(nv);
    } else {
      row.rmse_naive = kNaN;
      row.se_naive = kNaN;
    }
  }
  return out;
}

}  // namespace gsae::bootstrap
