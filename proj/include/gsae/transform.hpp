#ifndef GSAE_TRANSFORM_HPP
#define GSAE_TRANSFORM_HPP

#include "gsae/datamodel.hpp"

#include <optional>
#include <vector>

namespace gsae {

// Powers with |kappa| below this are evaluated on the log branch.
inline constexpr double kLogBranchKappa = 1e-8;

// Shifted Box-Cox transform h(z) = ((z - C)^kappa - 1) / kappa, log(z - C)
// at kappa = 0. The shift C is a fixed constant, never estimated.
class BoxCox {
 public:
  explicit BoxCox(double kappa, double shift = 0.0);

  double kappa() const { return kappa_; }
  double shift() const { return shift_; }
  bool log_branch() const { return log_branch_; }

  // Requires z > shift; throws ValidationError otherwise.
  double forward(double z) const;

  // nullopt when v lies outside the image of the transform.
  std::optional<double> inverse(double v) const;

  // Inverse without the range check. Caller guarantees in_range(v).
  double inverse_unchecked(double v) const;

  bool in_range(double v) const { return v > range_lower() && v < range_upper(); }

  // Open image interval: (-1/kappa, inf) for kappa > 0, (-inf, -1/kappa) for
  // kappa < 0, the real line at kappa = 0.
  double range_lower() const;
  double range_upper() const;

  // h at a class boundary with the conventions h(c <= C) = range_lower() and
  // h(+inf) = range_upper().
  double transformed_cut(double c) const;

  // h(c_0), ..., h(c_G).
  std::vector<double> transformed_boundaries(const Thresholds& thresholds) const;

 private:
  double kappa_;
  double shift_;
  bool log_branch_;
};

}  // namespace gsae

#endif  // GSAE_TRANSFORM_HPP
