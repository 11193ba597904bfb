#include "gpforecast/kernel.hpp"

#include <cmath>
#include <string>

#include "gpforecast/errors.hpp"

namespace gpf {

double rbf(const Eigen::Ref<const Eigen::VectorXd>& a,
           const Eigen::Ref<const Eigen::VectorXd>& b, const Hyperparameters& h) {
  if (a.size() != b.size()) {
    throw InputError("rbf: input dimensions differ (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  const double sq = (a - b).squaredNorm();
  const double ell = h.lengthscale();
  return h.signal_variance() * std::exp(-sq / (2.0 * ell * ell));
}

Eigen::MatrixXd squared_distances(const Eigen::Ref<const Eigen::MatrixXd>& A,
                                  const Eigen::Ref<const Eigen::MatrixXd>& B) {
  if (A.cols() != B.cols()) {
    throw InputError("squared_distances: row dimensions differ (" + std::to_string(A.cols()) +
                     " vs " + std::to_string(B.cols()) + ")");
  }
  const Eigen::VectorXd a2 = A.rowwise().squaredNorm();
  const Eigen::VectorXd b2 = B.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = a2.replicate(1, B.rows()) + b2.transpose().replicate(A.rows(), 1) -
                       2.0 * (A * B.transpose());
  // Cancellation can push exact-zero distances slightly negative.
  d2 = d2.cwiseMax(0.0);
  return d2;
}

Eigen::MatrixXd kernel_from_squared_distances(const Eigen::MatrixXd& sqdist,
                                              const Hyperparameters& h) {
  const double ell = h.lengthscale();
  const double neg_inv_two_ell2 = -1.0 / (2.0 * ell * ell);
  const double sf2 = h.signal_variance();
  // Single fused pass; this sits on the optimizer's hot path.
  return ((sqdist.array() * neg_inv_two_ell2).exp() * sf2).matrix();
}

Eigen::MatrixXd kernel_matrix(const Eigen::Ref<const Eigen::MatrixXd>& A,
                              const Eigen::Ref<const Eigen::MatrixXd>& B,
                              const Hyperparameters& h) {
  // Entrywise rbf() rather than the Gram-expansion shortcut: guarantees exact
  // symmetry and an exact signal-variance diagonal when A and B coincide.
  if (A.cols() != B.cols()) {
    throw InputError("kernel_matrix: row dimensions differ (" + std::to_string(A.cols()) +
                     " vs " + std::to_string(B.cols()) + ")");
  }
  Eigen::MatrixXd K(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < B.rows(); ++j) {
      K(i, j) = rbf(A.row(i).transpose(), B.row(j).transpose(), h);
    }
  }
  return K;
}

}  // namespace gpf
