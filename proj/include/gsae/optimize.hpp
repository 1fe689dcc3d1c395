#ifndef GSAE_OPTIMIZE_HPP
#define GSAE_OPTIMIZE_HPP

#include <Eigen/Dense>

#include <functional>

namespace gsae {

struct NelderMeadOptions {
  // Stop when max f - min f over the simplex is at most this.
  double ftol_abs = 1e-8;
  int max_evals = 500;
  // Initial simplex edge per coordinate; empty selects max(0.1 |x_k|, 0.05).
  Eigen::VectorXd steps;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evals = 0;
  bool converged = false;
};

// Derivative-free minimisation. Non-finite objective values are treated as
// +inf, so infeasible regions can be signalled by returning NaN or inf.
NelderMeadResult nelder_mead_minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                                      const Eigen::VectorXd& x0,
                                      const NelderMeadOptions& options = {});

}  // namespace gsae

#endif  // GSAE_OPTIMIZE_HPP
