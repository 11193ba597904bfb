#include <cmath>
#include <doctest.h>
#include <numbers>
#include <random>

#include "gpforecast/errors.hpp"
#include "gpforecast/gp.hpp"
#include "gpforecast/kernel.hpp"
#include "test_helpers.hpp"

using namespace gpf;

namespace {

TrainingSet make_training_set(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
  TrainingSet ts;
  ts.inputs = inputs;
  ts.targets = targets;
  ts.horizon_count = static_cast<int>(targets.cols());
  return ts;
}

// Sample targets from the GP prior with the given hyperparameters.
Eigen::MatrixXd sample_gp_targets(std::mt19937_64& rng, const Eigen::MatrixXd& inputs,
                                  const Hyperparameters& h, int columns) {
  const Eigen::MatrixXd k = kernel_matrix(inputs, inputs, h);
  const SpdFactor factor = factor_spd(k, h.noise_variance());
  const Eigen::MatrixXd white = testing::random_matrix(rng, inputs.rows(), columns);
  return factor.matrix_l() * white;
}

}  // namespace

TEST_CASE("nlml closed form for a single point") {
  Eigen::MatrixXd inputs(1, 3);
  inputs << 0.4, -1.0, 2.0;
  Eigen::MatrixXd targets(1, 1);
  const double y0 = 0.8;
  targets << y0;

  const double sf2 = 1.3;
  const double noise = 0.2;
  const Hyperparameters h(sf2, 1.0, noise);
  const NlmlResult res = nlml(make_training_set(inputs, targets), h);

  const double expected =
      0.5 * std::log(2.0 * std::numbers::pi * (sf2 + noise)) + y0 * y0 / (2.0 * (sf2 + noise));
  CHECK(res.value == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("nlml is additive over identical target columns") {
  std::mt19937_64 rng(23);
  const Eigen::MatrixXd inputs = testing::random_matrix(rng, 6, 2);
  const Eigen::MatrixXd y = testing::random_matrix(rng, 6, 1);
  Eigen::MatrixXd yy(6, 2);
  yy.col(0) = y.col(0);
  yy.col(1) = y.col(0);

  const Hyperparameters h(0.9, 1.4, 0.3);
  const double one = nlml(make_training_set(inputs, y), h).value;
  const double two = nlml(make_training_set(inputs, yy), h).value;
  CHECK(two == doctest::Approx(2.0 * one).epsilon(1e-12));
}

TEST_CASE("nlml gradient matches central finite differences") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> log_param(std::log(0.2), std::log(5.0));
  std::uniform_int_distribution<int> size(3, 50);

  for (int rep = 0; rep < 10; ++rep) {
    const int n = size(rng);
    const Eigen::MatrixXd inputs = testing::random_matrix(rng, n, 3);
    const Eigen::MatrixXd targets = testing::random_matrix(rng, n, 2);
    const TrainingSet ts = make_training_set(inputs, targets);

    const double ls = log_param(rng);
    const double ll = log_param(rng);
    const double ln = log_param(rng);
    const Hyperparameters h = Hyperparameters::from_log(ls, ll, ln);
    const NlmlResult res = nlml(ts, h);

    const double step = 1e-5;
    const auto value_at = [&](double a, double b, double c) {
      return nlml(ts, Hyperparameters::from_log(a, b, c)).value;
    };
    const double fd0 = (value_at(ls + step, ll, ln) - value_at(ls - step, ll, ln)) / (2 * step);
    const double fd1 = (value_at(ls, ll + step, ln) - value_at(ls, ll - step, ln)) / (2 * step);
    const double fd2 = (value_at(ls, ll, ln + step) - value_at(ls, ll, ln - step)) / (2 * step);

    const auto rel = [](double analytic, double fd) {
      return std::abs(analytic - fd) / std::max(1e-6, std::abs(fd));
    };
    CHECK(rel(res.gradient[0], fd0) <= 1e-4);
    CHECK(rel(res.gradient[1], fd1) <= 1e-4);
    CHECK(rel(res.gradient[2], fd2) <= 1e-4);
  }
}

TEST_CASE("fit_population is deterministic for a fixed seed") {
  std::mt19937_64 rng(31);
  const Eigen::MatrixXd inputs = testing::random_matrix(rng, 20, 2);
  const Eigen::MatrixXd targets = testing::random_matrix(rng, 20, 2);
  const TrainingSet ts = make_training_set(inputs, targets);

  OptimizerConfig opt;
  opt.restarts = 3;
  opt.seed = 42;
  const auto stats = testing::identity_stats(1);
  const PopulationModel a = fit_population(ts, opt, stats);
  const PopulationModel b = fit_population(ts, opt, stats);
  CHECK(a.hyper.log_signal_variance() == b.hyper.log_signal_variance());
  CHECK(a.hyper.log_lengthscale() == b.hyper.log_lengthscale());
  CHECK(a.hyper.log_noise_variance() == b.hyper.log_noise_variance());
}

TEST_CASE("fit_population never ends above its documented starting points") {
  // Constant zero targets; the optimizer must not move uphill from any of the
  // seeded restart draws (uniform in log([0.1,10]), three values per restart).
  Eigen::MatrixXd inputs(8, 2);
  std::mt19937_64 data_rng(37);
  inputs = testing::random_matrix(data_rng, 8, 2);
  const Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(8, 1);
  const TrainingSet ts = make_training_set(inputs, targets);

  OptimizerConfig opt;
  opt.restarts = 4;
  opt.seed = 7;
  const PopulationModel model = fit_population(ts, opt, testing::identity_stats(1));
  const double fitted = nlml(ts, model.hyper).value;

  std::mt19937_64 init_rng(opt.seed);
  std::uniform_real_distribution<double> dist(std::log(0.1), std::log(10.0));
  for (int r = 0; r < opt.restarts; ++r) {
    const double a = dist(init_rng);
    const double b = dist(init_rng);
    const double c = dist(init_rng);
    CHECK(fitted <= nlml(ts, Hyperparameters::from_log(a, b, c)).value + 1e-9);
  }
}

TEST_CASE("fit_population recovers known hyperparameters (smoke scale)") {
  std::mt19937_64 rng(41);
  const int n = 150;
  // Ground truth: signal 1.0, lengthscale 2.0, noise 0.1.
  Eigen::MatrixXd inputs = testing::random_matrix(rng, n, 2, 3.0);
  const Eigen::MatrixXd noiseless =
      sample_gp_targets(rng, inputs, Hyperparameters(1.0, 2.0, 1e-12), 1);
  const Eigen::MatrixXd noise = testing::random_matrix(rng, n, 1, std::sqrt(0.1));
  const TrainingSet ts = make_training_set(inputs, noiseless + noise);

  OptimizerConfig opt;
  opt.restarts = 3;
  opt.seed = 1;
  const PopulationModel model = fit_population(ts, opt, testing::identity_stats(1));
  CHECK(std::abs(model.hyper.log_signal_variance() - std::log(1.0)) < 0.6);
  CHECK(std::abs(model.hyper.log_lengthscale() - std::log(2.0)) < 0.6);
  CHECK(std::abs(model.hyper.log_noise_variance() - std::log(0.1)) < 0.6);
}

TEST_CASE("predict_sgp interpolates training rows in the small-noise limit") {
  std::mt19937_64 rng(43);
  const Eigen::MatrixXd inputs = testing::random_matrix(rng, 8, 3);
  const Eigen::MatrixXd targets = testing::random_matrix(rng, 8, 4);
  const Hyperparameters h(1.0, 1.5, 1e-10);
  const PopulationModel m =
      testing::make_model(h, inputs, targets, testing::identity_stats(2));

  const StdForecast f = predict_sgp_std(m, inputs.row(3).transpose());
  for (Eigen::Index c = 0; c < targets.cols(); ++c) {
    CHECK(f.means[c] == doctest::Approx(targets(3, c)).epsilon(1e-5));
  }
  CHECK(f.variance <= 1e-6);
}

TEST_CASE("predict_sgp reverts to the prior far from the data") {
  std::mt19937_64 rng(47);
  const Eigen::MatrixXd inputs = testing::random_matrix(rng, 10, 2);
  const Eigen::MatrixXd targets = testing::random_matrix(rng, 10, 2);
  const Hyperparameters h(1.3, 0.5, 0.05);
  const PopulationModel m =
      testing::make_model(h, inputs, targets, testing::identity_stats(1));

  Eigen::VectorXd far(2);
  far << 100.0, 100.0;  // >= 50 lengthscales from everything
  const StdForecast f = predict_sgp_std(m, far);
  CHECK(std::abs(f.means[0]) <= 1e-8);
  CHECK(std::abs(f.means[1]) <= 1e-8);
  CHECK(f.variance == doctest::Approx(h.signal_variance()).epsilon(1e-8));
}

TEST_CASE("predict_sgp single-point closed form") {
  Eigen::MatrixXd inputs(1, 2);
  inputs << 0.5, -0.25;
  Eigen::MatrixXd targets(1, 1);
  const double y0 = 1.7;
  targets << y0;
  const double sf2 = 0.8;
  const double noise = 0.2;
  const PopulationModel m = testing::make_model(Hyperparameters(sf2, 1.0, noise), inputs,
                                                targets, testing::identity_stats(1));

  const StdForecast f = predict_sgp_std(m, inputs.row(0).transpose());
  CHECK(f.means[0] == doctest::Approx(sf2 / (sf2 + noise) * y0).epsilon(1e-12));
}

TEST_CASE("predict_sgp rejects dimension mismatches") {
  std::mt19937_64 rng(53);
  const PopulationModel m =
      testing::make_model(Hyperparameters(1.0, 1.0, 0.1), testing::random_matrix(rng, 4, 3),
                          testing::random_matrix(rng, 4, 1), testing::identity_stats(2));
  CHECK_THROWS_AS(predict_sgp(m, Eigen::VectorXd::Zero(5)), InputError);
}

TEST_CASE("predictive variance never grows when training data is added") {
  std::mt19937_64 rng(59);
  const Hyperparameters h(1.0, 1.2, 0.1);
  const Eigen::MatrixXd inputs = testing::random_matrix(rng, 12, 2);
  const Eigen::MatrixXd targets = testing::random_matrix(rng, 12, 1);
  const Eigen::VectorXd u_star = testing::random_vector(rng, 2);

  double previous = std::numeric_limits<double>::infinity();
  for (Eigen::Index n = 2; n <= inputs.rows(); ++n) {
    const PopulationModel m = testing::make_model(h, inputs.topRows(n), targets.topRows(n),
                                                  testing::identity_stats(1));
    const double v = predict_sgp_std(m, u_star).variance;
    CHECK(v <= previous + 1e-8);
    previous = v;
  }
}

TEST_CASE("predictive mean is linear in the targets") {
  std::mt19937_64 rng(61);
  const Hyperparameters h(1.1, 0.9, 0.2);
  const Eigen::MatrixXd inputs = testing::random_matrix(rng, 9, 2);
  const Eigen::MatrixXd targets = testing::random_matrix(rng, 9, 3);
  const Eigen::VectorXd u_star = testing::random_vector(rng, 2);
  const double c = -2.5;

  const auto stats = testing::identity_stats(1);
  const StdForecast base = predict_sgp_std(testing::make_model(h, inputs, targets, stats), u_star);
  const StdForecast scaled =
      predict_sgp_std(testing::make_model(h, inputs, (c * targets).eval(), stats), u_star);
  for (Eigen::Index i = 0; i < base.means.size(); ++i) {
    CHECK(scaled.means[i] == doctest::Approx(c * base.means[i]).epsilon(1e-10));
  }
  CHECK(scaled.variance == doctest::Approx(base.variance).epsilon(1e-12));
}

TEST_CASE("forecasts share one variance across horizons and de-standardize") {
  std::mt19937_64 rng(67);
  const Eigen::MatrixXd inputs = testing::random_matrix(rng, 6, 2);
  const Eigen::MatrixXd targets = testing::random_matrix(rng, 6, 4);

  NormalizationStats stats = testing::identity_stats(1);
  stats.target_mean = 20.0;
  stats.target_std = 5.0;
  const PopulationModel m =
      testing::make_model(Hyperparameters(1.0, 1.0, 0.1), inputs, targets, stats);

  const Eigen::VectorXd u_star = testing::random_vector(rng, 2);
  const StdForecast std_f = predict_sgp_std(m, u_star);
  const GaussianForecast f = predict_sgp(m, u_star);

  REQUIRE(f.means.size() == 4);
  CHECK(f.horizon_months == std::vector<int>{6, 12, 18, 24});
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(f.means[i] ==
          doctest::Approx(std_f.means[static_cast<Eigen::Index>(i)] * 5.0 + 20.0)
              .epsilon(1e-12));
  }
  CHECK(f.variance == doctest::Approx(std_f.variance * 25.0).epsilon(1e-12));
}
