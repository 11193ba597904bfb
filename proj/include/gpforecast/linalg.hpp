#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <string>

namespace gpf {

// Cholesky factor of K + noise*I + jitter*I. The jitter starts at zero and,
// only if the factorization fails, escalates along a fixed ladder relative to
// the mean diagonal (1e-10 * mean_diag, x10 per retry, aborting above
// 1e-2 * mean_diag). Immutable once built; safe to share across threads.
class SpdFactor {
public:
  // `label` names the matrix in the degeneracy error message. Callers whose
  // matrix is symmetric by construction may skip the O(n^2) symmetry check.
  static SpdFactor compute(const Eigen::MatrixXd& K, double noise,
                           const std::string& label = "matrix", bool check_symmetry = true);

  // X with (K + noise*I + jitter*I) * X = B.
  Eigen::MatrixXd solve(const Eigen::Ref<const Eigen::MatrixXd>& B) const;
  Eigen::VectorXd solve_vec(const Eigen::Ref<const Eigen::VectorXd>& b) const;

  // log det(K + noise*I + jitter*I), from the Cholesky diagonal.
  double log_det() const;

  Eigen::MatrixXd inverse() const;

  const Eigen::MatrixXd& matrix_l() const { return factor_; }
  double jitter_used() const { return jitter_; }
  Eigen::Index dimension() const { return factor_.rows(); }

private:
  SpdFactor(Eigen::MatrixXd factor, double jitter)
      : factor_(std::move(factor)), jitter_(jitter) {}

  Eigen::MatrixXd factor_;  // lower triangular
  double jitter_;
};

// Functional spelling of SpdFactor::compute.
SpdFactor factor_spd(const Eigen::MatrixXd& K, double noise,
                     const std::string& label = "matrix");

}  // namespace gpf
