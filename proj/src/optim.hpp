#pragma once

#include <Eigen/Core>
#include <functional>

namespace gpf::detail {

// Objective callback: returns the value at x and, when `grad` is non-null,
// writes the gradient. May return +inf to reject a point.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;  // gradient tolerance reached
  bool usable = false;     // produced at least one finite evaluation
};

// Dense BFGS with Armijo backtracking. Small fixed dimension (log-parameter
// space), so the O(dim^2) inverse-Hessian update is negligible.
MinimizeResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0, int max_iterations,
                             double gradient_tolerance);

}  // namespace gpf::detail
