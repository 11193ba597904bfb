#pragma once

#include <Eigen/Core>
#include <string>

namespace gpf {

// z-normalization statistics fitted on one training fold. Feature columns and
// the score each get a mean/std pair; constant columns record std = 1 so the
// transform stays invertible.
struct NormalizationStats {
  Eigen::VectorXd feature_means;
  Eigen::VectorXd feature_stds;
  double target_mean = 0.0;
  double target_std = 1.0;
  std::string fitted_on;  // fold identifier, informational

  Eigen::Index dim() const { return feature_means.size(); }

  double standardize_target(double raw) const { return (raw - target_mean) / target_std; }
  double destandardize_target(double std_value) const {
    return std_value * target_std + target_mean;
  }
  // Variances scale with the square of the target std.
  double destandardize_variance(double std_variance) const {
    return std_variance * target_std * target_std;
  }

  Eigen::VectorXd standardize_features(const Eigen::VectorXd& raw) const {
    return (raw - feature_means).cwiseQuotient(feature_stds);
  }
  Eigen::VectorXd destandardize_features(const Eigen::VectorXd& std_values) const {
    return std_values.cwiseProduct(feature_stds) + feature_means;
  }
};

}  // namespace gpf
