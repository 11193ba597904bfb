#pragma once

#include <Eigen/Core>
#include <optional>

#include "gpforecast/gp.hpp"
#include "gpforecast/training.hpp"
#include "gpforecast/types.hpp"

namespace gpf {

// Population posterior evaluated jointly over a target subject's history rows:
// the conditional prior that the adapted model corrects against.
struct AdaptedPrior {
  Eigen::MatrixXd mu_cond;  // m x H, posterior means at the history inputs
  Eigen::MatrixXd v_cond;   // m x m, posterior covariance over history inputs
  Eigen::VectorXd cross;    // m, posterior covariance between history and test input
};

// Population posterior mean/covariance over the history inputs plus the
// posterior cross-covariance against u_star, all in standardized space.
AdaptedPrior conditional_prior(const PopulationModel& m, const TargetHistory& hist,
                               const Eigen::Ref<const Eigen::VectorXd>& u_star);

// Personalized GP (pGP): the population forecast corrected by the subject's
// observed history. Empty history returns the population forecast unchanged.
GaussianForecast predict_pgp(const PopulationModel& m, const TargetHistory& hist,
                             const Eigen::Ref<const Eigen::VectorXd>& u_star);

// Target-only GP (tGP): standard GP prediction on the history rows alone,
// reusing the population hyperparameters. The kernel over the history is
// rebuilt on every call, so it tracks the history as it grows.
GaussianForecast predict_tgp(const Hyperparameters& h, const TargetHistory& hist,
                             const Eigen::Ref<const Eigen::VectorXd>& u_star,
                             const NormalizationStats& norm);

// Gaussian average of the pGP and tGP forecasts:
// N(0.5 (mu_p + mu_t), 0.25 (V_p + V_t)). Absent tGP passes pGP through.
GaussianForecast predict_joint(const GaussianForecast& pgp,
                               const std::optional<GaussianForecast>& tgp);

// Standardized-space counterparts used by the evaluation pipeline.
StdForecast predict_pgp_std(const PopulationModel& m, const TargetHistory& hist,
                            const Eigen::Ref<const Eigen::VectorXd>& u_star);
StdForecast predict_tgp_std(const Hyperparameters& h, const TargetHistory& hist,
                            const Eigen::Ref<const Eigen::VectorXd>& u_star);

}  // namespace gpf
