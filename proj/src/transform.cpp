#include "gsae/transform.hpp"

#include <cmath>
#include <limits>

namespace gsae {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Above this magnitude a few ulps of rounding exceed 1e-11, so inverse()
// polishes its result against forward().
constexpr double kPolishMagnitude = 4096.0;

}  // namespace

BoxCox::BoxCox(double kappa, double shift)
    : kappa_(kappa), shift_(shift), log_branch_(std::abs(kappa) < kLogBranchKappa) {
  if (!std::isfinite(kappa) || !std::isfinite(shift)) {
    throw ValidationError("box-cox: kappa and shift must be finite");
  }
}

double BoxCox::forward(double z) const {
  if (!(z > shift_)) {
    throw ValidationError("box-cox: argument must exceed the shift");
  }
  const long double d = static_cast<long double>(z) - shift_;
  if (d == 0.0L) throw ValidationError("box-cox: argument must exceed the shift");
  const long double log_d = std::log(d);
  if (log_branch_) return static_cast<double>(log_d);
  const long double k = kappa_;
  const long double t = k * log_d;
  // expm1 avoids cancellation near z^kappa = 1; pow is more accurate away from it.
  if (std::abs(t) < 1.0L) return static_cast<double>(std::expm1(t) / k);
  return static_cast<double>((std::pow(d, k) - 1.0L) / k);
}

double BoxCox::inverse_unchecked(double v) const {
  long double z;
  if (log_branch_) {
    z = std::exp(static_cast<long double>(v));
  } else {
    const long double k = kappa_;
    const long double kv = k * v;
    if (std::abs(kv) < 0.5L) {
      z = std::exp(std::log1p(kv) / k);
    } else {
      z = std::pow(1.0L + kv, 1.0L / k);
    }
  }
  double out = static_cast<double>(z + shift_);
  if (std::abs(v) > kPolishMagnitude && std::isfinite(out) && out > shift_) {
    // Nudge by single ulps towards the z whose forward value is closest to v.
    double err = forward(out) - v;
    for (int step = 0; step < 4 && err != 0.0; ++step) {
      const double cand = std::nextafter(out, err > 0.0 ? -kInf : kInf);
      if (!(cand > shift_)) break;
      const double cand_err = forward(cand) - v;
      if (std::abs(cand_err) >= std::abs(err)) break;
      out = cand;
      err = cand_err;
    }
  }
  return out;
}

std::optional<double> BoxCox::inverse(double v) const {
  if (!std::isfinite(v) || !in_range(v)) return std::nullopt;
  const double z = inverse_unchecked(v);
  if (!(z > shift_) || !std::isfinite(z)) return std::nullopt;
  return z;
}

double BoxCox::range_lower() const {
  if (!log_branch_ && kappa_ > 0.0) return -1.0 / kappa_;
  return -kInf;
}

double BoxCox::range_upper() const {
  if (!log_branch_ && kappa_ < 0.0) return -1.0 / kappa_;
  return kInf;
}

double BoxCox::transformed_cut(double c) const {
  if (std::isinf(c) && c > 0.0) return range_upper();
  if (!(c > shift_)) return range_lower();
  return forward(c);
}

std::vector<double> BoxCox::transformed_boundaries(const Thresholds& thresholds) const {
  const int G = thresholds.groups();
  std::vector<double> t(static_cast<std::size_t>(G) + 1);
  for (int g = 0; g <= G; ++g) t[static_cast<std::size_t>(g)] = transformed_cut(thresholds.boundary(g));
  // c_0 is the bottom of the support even when the shift is negative.
  t.front() = range_lower();
  return t;
}

}  // namespace gsae
