#ifndef GSAE_BASELINE_HPP
#define GSAE_BASELINE_HPP

#include "gsae/datamodel.hpp"

#include <optional>
#include <span>
#include <vector>

namespace gsae::baseline {

// Class midpoints cbar_g = (c_{g-1} + c_g)/2 for g < G. The open top class
// uses cbar_G = c_{G-1} + (c_{G-1} - c_{G-2})/2 unless overridden.
class Midpoints {
 public:
  explicit Midpoints(const Thresholds& thresholds, std::optional<double> top_override = {});

  std::span<const double> values() const { return cbar_; }
  double operator[](int g) const { return cbar_[static_cast<std::size_t>(g)]; }

 private:
  std::vector<double> cbar_;
};

// n^{-1} sum_g cbar_g y_g. Throws ValidationError when n = 0.
double naive_mean(const GroupedSample& y, const Midpoints& midpoints);

// Gini coefficient of an already non-decreasing vector:
// (1/N) {N + 1 - 2 sum_j (N + 1 - j) z_(j) / sum_j z_j}.
double gini_sorted(std::span<const double> sorted);

// Sorts a copy, then gini_sorted. Throws ValidationError on an empty vector or
// a non-positive total.
double gini(std::span<const double> z);

}  // namespace gsae::baseline

#endif  // GSAE_BASELINE_HPP
