#pragma once

#include <Eigen/Core>

#include "gpforecast/types.hpp"

namespace gpf {

// Isotropic RBF kernel: k(a,b) = sigma_f^2 * exp(-||a-b||^2 / (2 l^2)).
double rbf(const Eigen::Ref<const Eigen::VectorXd>& a,
           const Eigen::Ref<const Eigen::VectorXd>& b, const Hyperparameters& h);

// Cross-kernel matrix with entry (i,j) = rbf(A.row(i), B.row(j), h).
Eigen::MatrixXd kernel_matrix(const Eigen::Ref<const Eigen::MatrixXd>& A,
                              const Eigen::Ref<const Eigen::MatrixXd>& B,
                              const Hyperparameters& h);

// Pairwise squared Euclidean distances between rows of A and rows of B.
// Cached by the fitting code so kernel rebuilds during optimization are O(n^2) exps.
Eigen::MatrixXd squared_distances(const Eigen::Ref<const Eigen::MatrixXd>& A,
                                  const Eigen::Ref<const Eigen::MatrixXd>& B);

// Kernel matrix from precomputed squared distances.
Eigen::MatrixXd kernel_from_squared_distances(const Eigen::MatrixXd& sqdist,
                                              const Hyperparameters& h);

}  // namespace gpf
