#include "optim.hpp"

#include <cmath>
#include <limits>

namespace gpf::detail {

namespace {

constexpr double kArmijoSlope = 1e-4;
constexpr double kBacktrackFactor = 0.5;
constexpr int kMaxBacktracks = 40;
// Two consecutive steps improving less than this (relative) end the run.
constexpr double kFuncToleranceRel = 1e-10;
// Trial steps are capped at this norm; beyond it the objective usually lands
// in degenerate territory where every probe pays the full jitter ladder.
constexpr double kMaxStepNorm = 10.0;

bool finite(double v) { return std::isfinite(v); }

}  // namespace

MinimizeResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0, int max_iterations,
                             double gradient_tolerance) {
  const Eigen::Index dim = x0.size();
  MinimizeResult res;
  res.x = x0;

  Eigen::VectorXd grad(dim);
  double value = f(x0, &grad);
  if (!finite(value) || !grad.allFinite()) {
    res.value = std::numeric_limits<double>::infinity();
    return res;
  }
  res.value = value;
  res.usable = true;

  // Started at identity, the first direction is the raw gradient, whose norm
  // can be in the thousands; scaling keeps the first trial step sane.
  Eigen::MatrixXd h_inv =
      Eigen::MatrixXd::Identity(dim, dim) / std::max(1.0, grad.norm());
  bool scaled_once = false;
  Eigen::VectorXd x = x0;
  int small_improvements = 0;

  for (int iter = 0; iter < max_iterations; ++iter) {
    res.iterations = iter;
    if (grad.norm() <= gradient_tolerance) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd direction = -(h_inv * grad);
    double slope = direction.dot(grad);
    if (!(slope < 0.0)) {
      // Update lost positive definiteness; fall back to steepest descent.
      h_inv = Eigen::MatrixXd::Identity(dim, dim) / std::max(1.0, grad.norm());
      scaled_once = false;
      direction = -(h_inv * grad);
      slope = direction.dot(grad);
    }
    const double direction_norm = direction.norm();
    if (direction_norm > kMaxStepNorm) {
      direction *= kMaxStepNorm / direction_norm;
      slope = direction.dot(grad);
    }

    double step = 1.0;
    double new_value = std::numeric_limits<double>::infinity();
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      x_new = x + step * direction;
      new_value = f(x_new, nullptr);
      if (finite(new_value) && new_value <= value + kArmijoSlope * step * slope) {
        accepted = true;
        break;
      }
      step *= kBacktrackFactor;
    }
    if (!accepted) {
      break;  // no descent possible at machine precision
    }

    Eigen::VectorXd grad_new(dim);
    const double check = f(x_new, &grad_new);
    if (!finite(check) || !grad_new.allFinite()) {
      break;
    }

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled_once) {
        h_inv = Eigen::MatrixXd::Identity(dim, dim) * (sy / y.squaredNorm());
        scaled_once = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim, dim);
      const Eigen::MatrixXd v = eye - rho * s * y.transpose();
      h_inv = v * h_inv * v.transpose() + rho * s * s.transpose();
    }

    const double improvement = value - new_value;
    x = x_new;
    value = new_value;
    grad = grad_new;
    res.x = x;
    res.value = value;
    res.iterations = iter + 1;

    if (improvement <= kFuncToleranceRel * (1.0 + std::abs(value))) {
      if (++small_improvements >= 2) {
        break;
      }
    } else {
      small_improvements = 0;
    }
  }

  if (!res.converged && grad.norm() <= gradient_tolerance) {
    res.converged = true;
  }
  return res;
}

}  // namespace gpf::detail
