#include "gpforecast/personalize.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gpforecast/errors.hpp"
#include "gpforecast/kernel.hpp"
#include "gpforecast/linalg.hpp"

namespace gpf {

namespace {

void check_test_input(Eigen::Index expected, const Eigen::Ref<const Eigen::VectorXd>& u_star,
                      const char* where) {
  if (u_star.size() != expected) {
    throw InputError(std::string(where) + ": test input has dimension " +
                     std::to_string(u_star.size()) + ", expected " + std::to_string(expected));
  }
}

}  // namespace

AdaptedPrior conditional_prior(const PopulationModel& m, const TargetHistory& hist,
                               const Eigen::Ref<const Eigen::VectorXd>& u_star) {
  if (hist.empty()) {
    throw InputError("conditional_prior: target history is empty");
  }
  check_test_input(m.input_dim(), u_star, "conditional_prior");
  if (hist.inputs.cols() != m.input_dim()) {
    throw InputError("conditional_prior: history input dimension mismatch");
  }

  const Eigen::MatrixXd k_sp = kernel_matrix(m.train_inputs, hist.inputs, m.hyper);
  const Eigen::MatrixXd k_pp = kernel_matrix(hist.inputs, hist.inputs, m.hyper);
  const Eigen::MatrixXd k_p_star = kernel_matrix(hist.inputs, u_star.transpose(), m.hyper);
  const Eigen::MatrixXd k_s_star = kernel_matrix(m.train_inputs, u_star.transpose(), m.hyper);

  // One solve against the source factor covers both the history columns and
  // the test column.
  Eigen::MatrixXd rhs(m.size(), hist.size() + 1);
  rhs.leftCols(hist.size()) = k_sp;
  rhs.col(hist.size()) = k_s_star;
  const Eigen::MatrixXd solved = m.factor.solve(rhs);

  AdaptedPrior prior;
  prior.mu_cond = k_sp.transpose() * m.alpha;
  Eigen::MatrixXd v = k_pp - k_sp.transpose() * solved.leftCols(hist.size());
  prior.v_cond = 0.5 * (v + v.transpose());
  prior.cross = k_p_star.col(0) - k_sp.transpose() * solved.col(hist.size());
  return prior;
}

StdForecast predict_pgp_std(const PopulationModel& m, const TargetHistory& hist,
                            const Eigen::Ref<const Eigen::VectorXd>& u_star) {
  const StdForecast base = predict_sgp_std(m, u_star);
  if (hist.empty()) {
    return base;
  }
  const AdaptedPrior prior = conditional_prior(m, hist, u_star);
  const SpdFactor cond_factor =
      factor_spd(prior.v_cond, m.hyper.noise_variance(), "adapted prior covariance");
  const Eigen::VectorXd weights = cond_factor.solve_vec(prior.cross);

  StdForecast f;
  f.means = base.means + (hist.targets - prior.mu_cond).transpose() * weights;
  const double correction = weights.dot(prior.cross);
  f.variance = std::clamp(base.variance - correction, 0.0, base.variance);
  return f;
}

GaussianForecast predict_pgp(const PopulationModel& m, const TargetHistory& hist,
                             const Eigen::Ref<const Eigen::VectorXd>& u_star) {
  if (hist.empty()) {
    // Footnote fallback: with no history the population model is used,
    // bit-for-bit.
    return predict_sgp(m, u_star);
  }
  return destandardize(predict_pgp_std(m, hist, u_star), m.normalizer);
}

StdForecast predict_tgp_std(const Hyperparameters& h, const TargetHistory& hist,
                            const Eigen::Ref<const Eigen::VectorXd>& u_star) {
  if (hist.empty()) {
    throw InputError("predict_tgp: target history is empty; caller handles the fallback");
  }
  check_test_input(hist.inputs.cols(), u_star, "predict_tgp");

  const Eigen::MatrixXd k_tt = kernel_matrix(hist.inputs, hist.inputs, h);
  const SpdFactor factor = factor_spd(k_tt, h.noise_variance(), "target history kernel");
  const Eigen::MatrixXd k_star = kernel_matrix(hist.inputs, u_star.transpose(), h);

  const Eigen::VectorXd solved = factor.solve_vec(k_star.col(0));

  StdForecast f;
  f.means = hist.targets.transpose() * solved;
  const double sf2 = h.signal_variance();
  f.variance = std::clamp(sf2 - k_star.col(0).dot(solved), 0.0, sf2);
  return f;
}

GaussianForecast predict_tgp(const Hyperparameters& h, const TargetHistory& hist,
                             const Eigen::Ref<const Eigen::VectorXd>& u_star,
                             const NormalizationStats& norm) {
  return destandardize(predict_tgp_std(h, hist, u_star), norm);
}

GaussianForecast predict_joint(const GaussianForecast& pgp,
                               const std::optional<GaussianForecast>& tgp) {
  if (!tgp.has_value()) {
    return pgp;
  }
  if (tgp->means.size() != pgp.means.size()) {
    throw InputError("predict_joint: forecasts disagree on horizon count");
  }
  GaussianForecast joint = pgp;
  for (std::size_t i = 0; i < joint.means.size(); ++i) {
    joint.means[i] = 0.5 * (pgp.means[i] + tgp->means[i]);
  }
  joint.variance = 0.25 * (pgp.variance + tgp->variance);
  return joint;
}

}  // namespace gpf
