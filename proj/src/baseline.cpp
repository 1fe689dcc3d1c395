#include "gsae/baseline.hpp"

#include <algorithm>
#include <cmath>

namespace gsae::baseline {

Midpoints::Midpoints(const Thresholds& thresholds, std::optional<double> top_override) {
  const int G = thresholds.groups();
  cbar_.resize(static_cast<std::size_t>(G));
  for (int g = 1; g < G; ++g) {
    cbar_[static_cast<std::size_t>(g - 1)] = 0.5 * (thresholds.boundary(g - 1) + thresholds.boundary(g));
  }
  const double last = thresholds.boundary(G - 1);
  const double width = last - thresholds.boundary(G - 2);
  cbar_.back() = top_override.value_or(last + 0.5 * width);
  if (!std::isfinite(cbar_.back()) || (G > 1 && cbar_.back() <= cbar_[cbar_.size() - 2])) {
    throw ValidationError("midpoints: top-class value must exceed the previous midpoint");
  }
}

double naive_mean(const GroupedSample& y, const Midpoints& midpoints) {
  if (y.n() == 0) throw ValidationError("naive_mean: empty sample");
  if (static_cast<std::size_t>(y.groups()) != midpoints.values().size()) {
    throw ValidationError("naive_mean: count arity does not match midpoints");
  }
  double acc = 0.0;
  for (int g = 0; g < y.groups(); ++g) acc += midpoints[g] * y.count(g);
  return acc / y.n();
}

double gini_sorted(std::span<const double> sorted) {
  const auto N = static_cast<double>(sorted.size());
  double total = 0.0;
  double weighted = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    total += sorted[j];
    weighted += (N - static_cast<double>(j)) * sorted[j];
  }
  if (sorted.empty() || !(total > 0.0)) {
    throw ValidationError("gini: needs a non-empty vector with positive total");
  }
  return (N + 1.0 - 2.0 * weighted / total) / N;
}

double gini(std::span<const double> z) {
  std::vector<double> s(z.begin(), z.end());
  std::sort(s.begin(), s.end());
  return gini_sorted(s);
}

}  // namespace gsae::baseline
