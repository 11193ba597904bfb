#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>

#include "gpforecast/linalg.hpp"
#include "gpforecast/normalize.hpp"
#include "gpforecast/training.hpp"
#include "gpforecast/types.hpp"

namespace gpf {

// Fitted population-level GP: hyperparameters, the factorized training kernel
// and the precomputed solve products needed for prediction. Immutable after
// fitting; share freely across threads.
struct PopulationModel {
  Hyperparameters hyper;
  Eigen::MatrixXd train_inputs;  // n x (d+1), standardized
  SpdFactor factor;              // of K(train,train) + noise*I
  Eigen::MatrixXd alpha;         // n x H, (K + noise*I)^{-1} targets
  NormalizationStats normalizer;
  int horizon_count = 4;
  std::vector<RowProvenance> provenance;

  Eigen::Index size() const { return train_inputs.rows(); }
  Eigen::Index input_dim() const { return train_inputs.cols(); }
};

struct NlmlResult {
  double value = 0.0;
  // d/d(log signal_variance), d/d(log lengthscale), d/d(log noise_variance)
  std::array<double, 3> gradient{};
};

// Negative log marginal likelihood of the training targets, summed over the H
// target columns which share one kernel, plus its analytic gradient in
// log-parameter space.
NlmlResult nlml(const TrainingSet& ts, const Hyperparameters& h);

struct OptimizerConfig {
  int restarts = 5;
  int max_iterations = 200;
  double gradient_tolerance = 1e-5;
  std::uint64_t seed = 0;
  // Restart initial values are drawn log-uniformly from [low, high].
  double init_low = 0.1;
  double init_high = 10.0;
};

// Fit hyperparameters by minimizing the NLML with a quasi-Newton method in log
// space, keeping the best of `restarts` seeded random restarts.
PopulationModel fit_population(const TrainingSet& ts, const OptimizerConfig& opt,
                               const NormalizationStats& normalizer);

// Mean/variance forecast in standardized target units.
struct StdForecast {
  Eigen::VectorXd means;  // H entries
  double variance = 0.0;  // shared across horizons
};

StdForecast predict_sgp_std(const PopulationModel& m,
                            const Eigen::Ref<const Eigen::VectorXd>& u_star);

// Population (sGP) forecast at a standardized test input, de-standardized to
// raw score units.
GaussianForecast predict_sgp(const PopulationModel& m,
                             const Eigen::Ref<const Eigen::VectorXd>& u_star);

GaussianForecast destandardize(const StdForecast& f, const NormalizationStats& stats);

}  // namespace gpf
