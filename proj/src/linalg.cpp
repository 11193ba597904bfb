#include "gpforecast/linalg.hpp"

#include <cmath>

#include "gpforecast/errors.hpp"

namespace gpf {

namespace {

constexpr double kJitterStartScale = 1e-10;
constexpr double kJitterMaxScale = 1e-2;

}  // namespace

SpdFactor SpdFactor::compute(const Eigen::MatrixXd& K, double noise, const std::string& label,
                             bool check_symmetry) {
  if (K.rows() != K.cols()) {
    throw InputError("factor_spd: " + label + " is not square");
  }
  if (noise < 0.0 || !std::isfinite(noise)) {
    throw InputError("factor_spd: noise must be finite and non-negative");
  }
  const Eigen::Index n = K.rows();
  if (check_symmetry) {
    const double sym_err = (K - K.transpose()).cwiseAbs().maxCoeff();
    if (sym_err > 1e-10) {
      throw InputError("factor_spd: " + label + " is not symmetric (max asymmetry " +
                       std::to_string(sym_err) + ")");
    }
  }

  const double mean_diag = K.diagonal().mean() + noise;
  Eigen::MatrixXd a = K;
  a.diagonal().array() += noise;
  double jitter = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt;
  while (true) {
    llt.compute(a);
    if (llt.info() == Eigen::Success) {
      return SpdFactor(llt.matrixL(), jitter);
    }
    const double next = (jitter == 0.0) ? kJitterStartScale * mean_diag : jitter * 10.0;
    if (!(next > 0.0) || next > kJitterMaxScale * mean_diag) {
      throw NumericalError("factor_spd: " + label + " (" + std::to_string(n) + "x" +
                           std::to_string(n) +
                           ") is numerically degenerate even at maximum jitter");
    }
    a.diagonal().array() += next - jitter;
    jitter = next;
  }
}

Eigen::MatrixXd SpdFactor::solve(const Eigen::Ref<const Eigen::MatrixXd>& B) const {
  if (B.rows() != factor_.rows()) {
    throw InputError("SpdFactor::solve: right-hand side has " + std::to_string(B.rows()) +
                     " rows, factor dimension is " + std::to_string(factor_.rows()));
  }
  Eigen::MatrixXd X = factor_.triangularView<Eigen::Lower>().solve(B);
  factor_.triangularView<Eigen::Lower>().transpose().solveInPlace(X);
  return X;
}

Eigen::VectorXd SpdFactor::solve_vec(const Eigen::Ref<const Eigen::VectorXd>& b) const {
  if (b.size() != factor_.rows()) {
    throw InputError("SpdFactor::solve: right-hand side has " + std::to_string(b.size()) +
                     " rows, factor dimension is " + std::to_string(factor_.rows()));
  }
  Eigen::VectorXd x = factor_.triangularView<Eigen::Lower>().solve(b);
  factor_.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
  return x;
}

double SpdFactor::log_det() const {
  return 2.0 * factor_.diagonal().array().log().sum();
}

Eigen::MatrixXd SpdFactor::inverse() const {
  Eigen::MatrixXd inv = solve(Eigen::MatrixXd::Identity(factor_.rows(), factor_.rows()));
  // Round-trip through the triangular solves is not exactly symmetric.
  return 0.5 * (inv + inv.transpose());
}

SpdFactor factor_spd(const Eigen::MatrixXd& K, double noise, const std::string& label) {
  return SpdFactor::compute(K, noise, label);
}

}  // namespace gpf
