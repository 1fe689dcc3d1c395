#include "gsae/datamodel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

namespace gsae {

namespace {

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

bool same_bits(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    if (!same_bits(a[k], b[k])) return false;
  }
  return true;
}

}  // namespace

Thresholds::Thresholds(std::vector<double> cuts) : cuts_(std::move(cuts)) {
  if (cuts_.empty()) {
    throw ValidationError("thresholds: need at least one cut (G >= 2)");
  }
  for (std::size_t k = 0; k < cuts_.size(); ++k) {
    if (!std::isfinite(cuts_[k]) || cuts_[k] <= 0.0) {
      throw ValidationError("thresholds: cuts must be finite and positive");
    }
    if (k > 0 && !(cuts_[k] > cuts_[k - 1])) {
      throw ValidationError("thresholds: cuts must be strictly increasing");
    }
  }
}

double Thresholds::boundary(int g) const {
  if (g <= 0) return 0.0;
  if (g >= groups()) return std::numeric_limits<double>::infinity();
  return cuts_[static_cast<std::size_t>(g - 1)];
}

int Thresholds::classify(double z) const {
  auto it = std::upper_bound(cuts_.begin(), cuts_.end(), z);
  return static_cast<int>(it - cuts_.begin());
}

GroupedSample::GroupedSample(std::vector<int> counts) : counts_(std::move(counts)) {
  if (counts_.size() < 2) {
    throw ValidationError("grouped sample: need at least two classes");
  }
  double log_denom = 0.0;
  for (int c : counts_) {
    if (c < 0) throw ValidationError("grouped sample: negative count");
    n_ += c;
    log_denom += std::lgamma(static_cast<double>(c) + 1.0);
  }
  log_coef_ = std::lgamma(static_cast<double>(n_) + 1.0) - log_denom;
}

double Hyperparameters::phi(const Eigen::VectorXd& x) const { return std::exp(x.dot(gamma)); }

bool Hyperparameters::operator==(const Hyperparameters& o) const {
  return same_bits(beta, o.beta) && same_bits(tau2, o.tau2) && same_bits(lambda, o.lambda) &&
         same_bits(kappa, o.kappa) && same_bits(gamma, o.gamma);
}

bool EmTraceEntry::operator==(const EmTraceEntry& o) const {
  if (iter != o.iter || !(psi == o.psi)) return false;
  for (std::size_t k = 0; k < e_k.size(); ++k) {
    if (!same_bits(e_k[k], o.e_k[k])) return false;
  }
  return same_bits(ess_q10, o.ess_q10) && same_bits(ess_q50, o.ess_q50) &&
         same_bits(ess_q90, o.ess_q90);
}

void validate(const Hyperparameters& psi) {
  if (psi.beta.size() == 0 || psi.beta.size() != psi.gamma.size()) {
    throw ValidationError("hyperparameters: beta and gamma must have the same nonzero length");
  }
  if (!psi.beta.allFinite() || !psi.gamma.allFinite() || !std::isfinite(psi.kappa)) {
    throw ValidationError("hyperparameters: non-finite beta, gamma or kappa");
  }
  if (!(psi.tau2 > 0.0) || !std::isfinite(psi.tau2)) {
    throw ValidationError("hyperparameters: tau2 must be positive");
  }
  if (!(psi.lambda > 0.0) || !std::isfinite(psi.lambda)) {
    throw ValidationError("hyperparameters: lambda must be positive");
  }
}

void validate(const Hyperparameters& psi, std::span<const AreaRecord> areas) {
  validate(psi);
  for (const auto& a : areas) {
    if (a.x.size() != psi.p()) {
      throw ValidationError("area " + a.id + ": covariate length differs from model p");
    }
    double phi = psi.phi(a.x);
    if (!std::isfinite(phi) || phi <= 0.0) {
      throw ValidationError("area " + a.id + ": exp(x'gamma) is not finite and positive");
    }
  }
}

void validate_areas(std::span<const AreaRecord> areas, const Thresholds& thresholds) {
  if (areas.empty()) throw ValidationError("areas: no rows");
  const auto p = areas.front().x.size();
  if (p == 0) throw ValidationError("areas: no covariate columns");
  for (const auto& a : areas) {
    if (a.x.size() != p) {
      throw ValidationError("area " + a.id + ": covariate length differs across areas");
    }
    if (!a.x.allFinite()) throw ValidationError("area " + a.id + ": non-finite covariate");
    if (a.pop_size < 1) throw ValidationError("area " + a.id + ": population size must be >= 1");
    if (a.sample) {
      if (a.sample->groups() != thresholds.groups()) {
        throw ValidationError("area " + a.id + ": count arity " +
                              std::to_string(a.sample->groups()) + " does not match G=" +
                              std::to_string(thresholds.groups()));
      }
      if (a.sample->n() < 1) throw ValidationError("area " + a.id + ": in-sample area with n=0");
      if (a.sample->n() > a.pop_size) {
        throw ValidationError("area " + a.id + ": sample size exceeds population size");
      }
    }
  }
}

std::vector<AreaRecord> in_sample_areas(std::span<const AreaRecord> areas) {
  std::vector<AreaRecord> out;
  std::copy_if(areas.begin(), areas.end(), std::back_inserter(out),
               [](const AreaRecord& a) { return a.in_sample(); });
  return out;
}

Eigen::MatrixXd design_matrix(std::span<const AreaRecord> areas) {
  if (areas.empty()) return {};
  Eigen::MatrixXd X(static_cast<Eigen::Index>(areas.size()), areas.front().x.size());
  for (std::size_t i = 0; i < areas.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = areas[i].x.transpose();
  }
  return X;
}

CovariateScaling CovariateScaling::fit(std::span<const AreaRecord> areas) {
  CovariateScaling s;
  const Eigen::MatrixXd X = design_matrix(areas);
  if (X.rows() == 0) return s;
  for (Eigen::Index k = 0; k < X.cols(); ++k) {
    const double mean = X.col(k).mean();
    const double var =
        X.rows() > 1 ? (X.col(k).array() - mean).square().sum() / static_cast<double>(X.rows() - 1)
                     : 0.0;
    if (var > 0.0) {
      s.center.push_back(mean);
      s.scale.push_back(std::sqrt(var));
    } else {
      s.center.push_back(0.0);
      s.scale.push_back(1.0);
    }
  }
  return s;
}

Eigen::VectorXd CovariateScaling::apply(const Eigen::VectorXd& x) const {
  if (empty()) return x;
  if (static_cast<std::size_t>(x.size()) != center.size()) {
    throw ValidationError("covariate scaling: dimension mismatch");
  }
  Eigen::VectorXd out(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    out[k] = (x[k] - center[static_cast<std::size_t>(k)]) / scale[static_cast<std::size_t>(k)];
  }
  return out;
}

void CovariateScaling::apply_inplace(std::vector<AreaRecord>& areas) const {
  for (auto& a : areas) a.x = apply(a.x);
}

}  // namespace gsae
