#ifndef GSAE_DATAMODEL_HPP
#define GSAE_DATAMODEL_HPP

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsae {

// Raised for malformed input, invariant violations and model/data mismatch.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a numerical routine cannot produce a usable result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Class boundaries 0 = c_0 < c_1 < ... < c_{G-1} < c_G = +inf. Only the
// finite interior cuts are stored.
class Thresholds {
 public:
  Thresholds() = default;
  explicit Thresholds(std::vector<double> cuts);

  int groups() const { return static_cast<int>(cuts_.size()) + 1; }
  std::span<const double> cuts() const { return cuts_; }

  // c_g for g = 0..G, with the implicit c_0 = 0 and c_G = +inf.
  double boundary(int g) const;

  // Index g in 0..G-1 of the class holding z (values below c_1 fall in the
  // first class, which matters only for shifted data).
  int classify(double z) const;

  bool operator==(const Thresholds&) const = default;

 private:
  std::vector<double> cuts_;
};

class GroupedSample {
 public:
  GroupedSample() = default;
  explicit GroupedSample(std::vector<int> counts);

  std::span<const int> counts() const { return counts_; }
  int count(int g) const { return counts_[static_cast<std::size_t>(g)]; }
  int groups() const { return static_cast<int>(counts_.size()); }
  int n() const { return n_; }

  // log(n! / prod_g y_g!)
  double log_multinomial_coef() const { return log_coef_; }

  bool operator==(const GroupedSample& o) const { return counts_ == o.counts_; }

 private:
  std::vector<int> counts_;
  int n_ = 0;
  double log_coef_ = 0.0;
};

struct AreaRecord {
  std::string id;
  Eigen::VectorXd x;
  long pop_size = 1;
  std::optional<GroupedSample> sample;

  bool in_sample() const { return sample.has_value(); }
};

// psi = (beta, tau2, lambda, kappa, gamma).
struct Hyperparameters {
  Eigen::VectorXd beta;
  double tau2 = 1.0;
  double lambda = 1.0;
  double kappa = 0.0;
  Eigen::VectorXd gamma;

  int p() const { return static_cast<int>(beta.size()); }
  double linear_mean(const Eigen::VectorXd& x) const { return x.dot(beta); }
  double phi(const Eigen::VectorXd& x) const;

  // Inverse-gamma prior of sigma^2: shape lambda/2 + 1, scale lambda*phi/2.
  double sigma2_shape() const { return 0.5 * lambda + 1.0; }
  double sigma2_scale(const Eigen::VectorXd& x) const { return 0.5 * lambda * phi(x); }

  bool operator==(const Hyperparameters& o) const;
};

// Throws ValidationError when tau2 or lambda are not positive, the vectors
// disagree in length, or any value is non-finite.
void validate(const Hyperparameters& psi);

// Additionally checks phi_i = exp(x_i' gamma) is finite for every area.
void validate(const Hyperparameters& psi, std::span<const AreaRecord> areas);

struct RandomEffects {
  double b = 0.0;
  double sigma2 = 1.0;
};

// Options that change the model's likelihood and transform.
struct ModelOptions {
  // Box-Cox shift C: the transform is applied to z - C.
  double shift = 0.0;
  // Divide group probabilities by the total mass inside the transform range.
  bool renormalize_groups = false;

  bool operator==(const ModelOptions&) const = default;
};

// Checks covariate arity and finiteness, and pop_size >= n >= 1 for every
// in-sample area. Throws ValidationError naming the offending area.
void validate_areas(std::span<const AreaRecord> areas, const Thresholds& thresholds);

// Areas that carry a sample.
std::vector<AreaRecord> in_sample_areas(std::span<const AreaRecord> areas);

// Design matrix with one row per area.
Eigen::MatrixXd design_matrix(std::span<const AreaRecord> areas);

// Z-score standardization of non-constant covariate columns. Constant
// columns (e.g. the intercept) are left untouched.
struct CovariateScaling {
  std::vector<double> center;
  std::vector<double> scale;

  bool empty() const { return center.empty(); }
  static CovariateScaling fit(std::span<const AreaRecord> areas);
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  void apply_inplace(std::vector<AreaRecord>& areas) const;

  bool operator==(const CovariateScaling&) const = default;
};

// Convergence blocks in the order beta, tau2, kappa, lambda, gamma.
inline constexpr std::array<const char*, 5> kBlockNames = {"beta", "tau2", "kappa", "lambda",
                                                           "gamma"};

struct EmTraceEntry {
  int iter = 0;
  Hyperparameters psi;
  // NaN until the window is long enough to evaluate the criterion.
  std::array<double, 5> e_k{};
  double ess_q10 = 0.0;
  double ess_q50 = 0.0;
  double ess_q90 = 0.0;

  bool operator==(const EmTraceEntry& o) const;
};

struct FittedModel {
  Thresholds thresholds;
  ModelOptions options;
  Hyperparameters psi;
  CovariateScaling scaling;
  bool converged = false;
  int iterations = 0;
  std::vector<EmTraceEntry> trace;

  bool operator==(const FittedModel&) const = default;
};

}  // namespace gsae

#endif  // GSAE_DATAMODEL_HPP
