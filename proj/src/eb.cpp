#include "gsae/eb.hpp"

#include "gsae/baseline.hpp"
#include "gsae/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gsae::eb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kTail = 5.0;
constexpr int kMaxRejections = 1000000;
constexpr int kRangeAttempts = 100;
constexpr double kClampOffset = 1e-8;

// Standard normal restricted to [a, b) with a > kTail.
double upper_tail(double a, double b, Rng& rng) {
  const double root = std::sqrt(a * a + 4.0);
  const double rate = 0.5 * (a + root);
  const double uniform_width =
      2.0 * std::sqrt(std::exp(1.0)) / (a + root) * std::exp(0.25 * (a * a - a * root));
  const bool use_uniform = std::isfinite(b) && (b - a) < uniform_width;
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    if (use_uniform) {
      const double z = a + (b - a) * rng.uniform();
      if (rng.uniform() < std::exp(0.5 * (a * a - z * z))) return z;
    } else {
      const double z = a + rng.exponential() / rate;
      if (z >= b) continue;
      const double d = z - rate;
      if (rng.uniform() < std::exp(-0.5 * d * d)) return z;
    }
  }
  throw NumericalError("rejection limit reached");
}

std::string interval_text(double lo, double hi) {
  std::ostringstream os;
  os.precision(17);
  os << "[" << lo << ", " << hi << ")";
  return os.str();
}

}  // namespace

void GibbsConfig::validate() const {
  if (iterations < 1 || burnin < 0) {
    throw ValidationError("gibbs: need iterations >= 1 and burnin >= 0");
  }
}

double truncated_normal(double mu, double sigma, double lo, double hi, Rng& rng) {
  if (!(lo < hi) || !(sigma > 0.0) || !std::isfinite(mu)) {
    throw NumericalError("truncated normal: empty interval " + interval_text(lo, hi));
  }
  const double a = (lo - mu) / sigma;
  const double b = (hi - mu) / sigma;
  double z = 0.0;
  try {
    if (a > kTail) {
      z = upper_tail(a, b, rng);
    } else if (b < -kTail) {
      z = -upper_tail(-b, -a, rng);
    } else if (a >= 0.0) {
      const double sa = normal_sf(a);
      const double sb = normal_sf(b);
      if (!(sa > sb)) throw NumericalError("interval mass underflow");
      z = -normal_quantile(sa - rng.uniform() * (sa - sb));
    } else {
      const double ca = normal_cdf(a);
      const double cb = normal_cdf(b);
      if (!(cb > ca)) throw NumericalError("interval mass underflow");
      z = normal_quantile(ca + rng.uniform() * (cb - ca));
    }
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("truncated normal: ") + e.what() + " on " +
                         interval_text(lo, hi));
  }
  double v = mu + sigma * z;
  if (v < lo) v = lo;
  if (v >= hi) v = std::nextafter(hi, -kInf);
  return v;
}

double draw_in_range(double mu, double sigma, const BoxCox& h, Rng& rng, long& clamped) {
  double v = 0.0;
  for (int attempt = 0; attempt < kRangeAttempts; ++attempt) {
    v = mu + sigma * rng.normal();
    if (h.in_range(v)) return v;
  }
  ++clamped;
  return v <= h.range_lower() ? h.range_lower() + kClampOffset : h.range_upper() - kClampOffset;
}

AreaChain::AreaChain(const AreaRecord& area_, const Hyperparameters& psi_,
                     const Thresholds& thresholds, const ModelOptions& options)
    : area(area_), psi(psi_), h(psi_.kappa, options.shift),
      bounds(h.transformed_boundaries(thresholds)) {
  long n = 0;
  if (area.sample) {
    const auto& y = *area.sample;
    if (y.groups() != thresholds.groups()) {
      throw ValidationError("gibbs: area '" + area.id + "' count arity does not match thresholds");
    }
    n = y.n();
    group_of.reserve(static_cast<std::size_t>(n));
    for (int g = 0; g < y.groups(); ++g) group_of.insert(group_of.end(), static_cast<std::size_t>(y.count(g)), g);
  }
  if (area.pop_size < n || area.pop_size < 1) {
    throw ValidationError("gibbs: area '" + area.id + "' has N_pop below its sample size");
  }
  out_count = area.pop_size - n;
}

PosteriorDraw initial_draw(const AreaChain& chain) {
  PosteriorDraw d;
  d.mu = chain.psi.linear_mean(chain.area.x);
  d.sigma2 = chain.psi.phi(chain.area.x);
  const double sigma0 = std::sqrt(d.sigma2);
  const auto& c = chain.bounds;
  d.v_in.resize(chain.group_of.size());
  for (std::size_t j = 0; j < d.v_in.size(); ++j) {
    const auto g = static_cast<std::size_t>(chain.group_of[j]);
    const double lo = c[g];
    const double hi = c[g + 1];
    double v;
    if (std::isfinite(lo) && std::isfinite(hi)) {
      v = 0.5 * (lo + hi);
    } else if (std::isfinite(lo)) {
      v = lo + sigma0;
    } else if (std::isfinite(hi)) {
      v = hi - sigma0;
    } else {
      v = d.mu;
    }
    d.v_in[j] = v;
  }
  d.v_out.assign(static_cast<std::size_t>(chain.out_count), d.mu);
  return d;
}

NormalParams mu_conditional(double linear_mean, double tau2, double sigma2, double N, double vbar) {
  const double denom = sigma2 + N * tau2;
  return {(sigma2 * linear_mean + N * tau2 * vbar) / denom, tau2 * sigma2 / denom};
}

InverseGammaParams sigma2_conditional(double lambda, double phi, double N, double ss) {
  return {0.5 * (N + lambda) + 1.0, 0.5 * (lambda * phi + ss)};
}

void gibbs_update(PosteriorDraw& s, const AreaChain& chain, Rng& rng, long& clamped) {
  const auto& psi = chain.psi;
  const auto N = static_cast<double>(chain.area.pop_size);

  double sum = 0.0;
  for (double v : s.v_in) sum += v;
  for (double v : s.v_out) sum += v;
  const auto mu_post = mu_conditional(psi.linear_mean(chain.area.x), psi.tau2, s.sigma2, N, sum / N);
  s.mu = rng.normal(mu_post.mean, std::sqrt(mu_post.var));

  const double sigma = std::sqrt(s.sigma2);
  for (std::size_t j = 0; j < s.v_in.size(); ++j) {
    const auto g = static_cast<std::size_t>(chain.group_of[j]);
    const double lo = chain.bounds[g];
    const double hi = chain.bounds[g + 1];
    try {
      s.v_in[j] = truncated_normal(s.mu, sigma, lo, hi, rng);
    } catch (const NumericalError& e) {
      throw NumericalError("gibbs: area '" + chain.area.id + "', class " + std::to_string(g + 1) +
                           ": " + e.what());
    }
    if (!(s.v_in[j] >= lo && s.v_in[j] < hi)) {
      throw NumericalError("gibbs: latent value left its class in area '" + chain.area.id + "'");
    }
  }
  for (double& v : s.v_out) v = draw_in_range(s.mu, sigma, chain.h, rng, clamped);

  double ss = 0.0;
  for (double v : s.v_in) ss += (v - s.mu) * (v - s.mu);
  for (double v : s.v_out) ss += (v - s.mu) * (v - s.mu);
  const auto s2_post = sigma2_conditional(psi.lambda, psi.phi(chain.area.x), N, ss);
  s.sigma2 = rng.inverse_gamma(s2_post.shape, s2_post.scale);
}

PosteriorDraw gibbs_step(const PosteriorDraw& current, const AreaChain& chain, Rng& rng) {
  PosteriorDraw next = current;
  long clamped = 0;
  gibbs_update(next, chain, rng, clamped);
  return next;
}

namespace {

// Accumulates the per-draw mean and Gini of back-transformed populations.
class PopulationSummary {
 public:
  PopulationSummary(const BoxCox& h, bool compute_gini) : h_(h), gini_(compute_gini) {}

  template <class Range>
  void add(const Range& a, const Range& b) {
    z_.clear();
    for (double v : a) z_.push_back(h_.inverse_unchecked(v));
    for (double v : b) z_.push_back(h_.inverse_unchecked(v));
    double total = 0.0;
    for (double v : z_) total += v;
    mean_sum_ += total / static_cast<double>(z_.size());
    ++draws_;
    if (gini_ && total > 0.0) {
      std::sort(z_.begin(), z_.end());
      gini_sum_ += baseline::gini_sorted(z_);
      ++gini_draws_;
    }
  }

  void finish(EbEstimate& out) const {
    out.mean_eb = mean_sum_ / draws_;
    out.gini_eb = gini_draws_ > 0 ? gini_sum_ / gini_draws_ : kNaN;
    out.draws_used = draws_;
  }

 private:
  const BoxCox& h_;
  bool gini_;
  std::vector<double> z_;
  double mean_sum_ = 0.0;
  double gini_sum_ = 0.0;
  int draws_ = 0;
  int gini_draws_ = 0;
};

}  // namespace

EbEstimate eb_estimate(const AreaRecord& area, const Hyperparameters& psi,
                       const Thresholds& thresholds, const ModelOptions& options,
                       const GibbsConfig& config, Rng& rng) {
  config.validate();
  if (!area.in_sample()) throw ValidationError("eb_estimate: area '" + area.id + "' has no sample");
  const AreaChain chain(area, psi, thresholds, options);
  EbEstimate out;
  out.area_id = area.id;
  PosteriorDraw state = initial_draw(chain);
  PopulationSummary summary(chain.h, config.compute_gini);
  for (int t = 0; t < config.burnin + config.iterations; ++t) {
    gibbs_update(state, chain, rng, out.clamped_draws);
    if (t >= config.burnin) summary.add(state.v_in, state.v_out);
  }
  summary.finish(out);
  return out;
}

EbEstimate predict_out_of_sample(const AreaRecord& area, const Hyperparameters& psi,
                                 const Thresholds& thresholds, const ModelOptions& options,
                                 int draws, bool compute_gini, Rng& rng) {
  if (draws < 1) throw ValidationError("predict_out_of_sample: need at least one draw");
  if (area.pop_size < 1) throw ValidationError("predict_out_of_sample: N_pop must be positive");
  const BoxCox h(psi.kappa, options.shift);
  (void)thresholds;
  EbEstimate out;
  out.area_id = area.id;
  const double xb = psi.linear_mean(area.x);
  const double shape = psi.sigma2_shape();
  const double scale = psi.sigma2_scale(area.x);
  const double tau = std::sqrt(psi.tau2);
  std::vector<double> v(static_cast<std::size_t>(area.pop_size));
  const std::vector<double> none;
  PopulationSummary summary(h, compute_gini);
  for (int s = 0; s < draws; ++s) {
    const double mu = xb + tau * rng.normal();
    const double sigma = std::sqrt(rng.inverse_gamma(shape, scale));
    for (double& value : v) value = draw_in_range(mu, sigma, h, rng, out.clamped_draws);
    summary.add(v, none);
  }
  summary.finish(out);
  return out;
}

}  // namespace gsae::eb
