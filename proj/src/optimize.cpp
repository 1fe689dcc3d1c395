#include "gsae/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace gsae {

NelderMeadResult nelder_mead_minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                                      const Eigen::VectorXd& x0,
                                      const NelderMeadOptions& options) {
  const Eigen::Index n = x0.size();
  NelderMeadResult res;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n) + 1, x0);
  std::vector<double> vals(pts.size());
  vals[0] = eval(x0);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double step = options.steps.size() == n ? options.steps[k]
                                                  : std::max(0.1 * std::abs(x0[k]), 0.05);
    pts[static_cast<std::size_t>(k) + 1][k] += step;
    vals[static_cast<std::size_t>(k) + 1] = eval(pts[static_cast<std::size_t>(k) + 1]);
  }

  std::vector<std::size_t> order(pts.size());
  for (;;) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];

    if (std::isfinite(vals[worst]) && vals[worst] - vals[best] <= options.ftol_abs) {
      res.converged = true;
      break;
    }
    if (res.evals >= options.max_evals) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k + 1 < order.size(); ++k) centroid += pts[order[k]];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = eval(xr);
    if (fr < vals[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    bool shrink = false;
    if (fr < vals[worst]) {
      const Eigen::VectorXd xc = centroid + 0.5 * (xr - centroid);
      const double fc = eval(xc);
      if (fc <= fr) {
        pts[worst] = xc;
        vals[worst] = fc;
      } else {
        shrink = true;
      }
    } else {
      const Eigen::VectorXd xcc = centroid + 0.5 * (pts[worst] - centroid);
      const double fcc = eval(xcc);
      if (fcc < vals[worst]) {
        pts[worst] = xcc;
        vals[worst] = fcc;
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      for (std::size_t k = 1; k < order.size(); ++k) {
        const std::size_t idx = order[k];
        pts[idx] = pts[best] + 0.5 * (pts[idx] - pts[best]);
        vals[idx] = eval(pts[idx]);
      }
    }
  }

  const auto best_it = std::min_element(vals.begin(), vals.end());
  const auto best_idx = static_cast<std::size_t>(best_it - vals.begin());
  res.x = pts[best_idx];
  res.value = vals[best_idx];
  return res;
}

}  // namespace gsae
