#include "gpforecast/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "gpforecast/errors.hpp"
#include "gpforecast/kernel.hpp"
#include "optim.hpp"

namespace gpf {

namespace {

void check_training_set(const TrainingSet& ts) {
  if (ts.inputs.rows() == 0) {
    throw InputError("training set is empty");
  }
  if (ts.inputs.rows() != ts.targets.rows()) {
    throw InputError("training set inputs and targets disagree on row count");
  }
  if (ts.targets.cols() != ts.horizon_count) {
    throw InputError("training set target columns do not match horizon count");
  }
  if (!ts.inputs.allFinite() || !ts.targets.allFinite()) {
    throw InputError("training set contains non-finite entries; impute upstream");
  }
}

// NLML over H target columns sharing one kernel. The squared-distance matrix
// is fixed across hyperparameter changes, so it is computed once per fit.
class NlmlObjective {
public:
  NlmlObjective(const Eigen::MatrixXd& sqdist, const Eigen::MatrixXd& targets)
      : sqdist_(sqdist), targets_(targets) {}

  // Value only (used by line-search probes; skips the O(n^3) inverse). The
  // kernel built from cached squared distances is symmetric by construction,
  // so the factorization skips its symmetry scan.
  double value(const Hyperparameters& h) const {
    Eigen::MatrixXd K = kernel_from_squared_distances(sqdist_, h);
    const SpdFactor factor = SpdFactor::compute(K, h.noise_variance(), "training kernel", false);
    const Eigen::MatrixXd alpha = factor.solve(targets_);
    return value_from(factor, alpha);
  }

  double value_grad(const Hyperparameters& h, Eigen::Vector3d& grad) const {
    Eigen::MatrixXd K = kernel_from_squared_distances(sqdist_, h);
    const SpdFactor factor = SpdFactor::compute(K, h.noise_variance(), "training kernel", false);
    const Eigen::MatrixXd alpha = factor.solve(targets_);
    const double val = value_from(factor, alpha);

    const double n_cols = static_cast<double>(targets_.cols());
    const Eigen::MatrixXd w =
        n_cols * factor.inverse() - alpha * alpha.transpose();

    const double ell = h.lengthscale();
    // dK/d(log sf2) = K, dK/d(log ell) = K .* sqdist / ell^2,
    // dA/d(log noise) = noise * I, each contracted against W/2.
    grad[0] = 0.5 * w.cwiseProduct(K).sum();
    grad[1] = 0.5 * w.cwiseProduct(K).cwiseProduct(sqdist_).sum() / (ell * ell);
    grad[2] = 0.5 * h.noise_variance() * w.trace();
    return val;
  }

private:
  double value_from(const SpdFactor& factor, const Eigen::MatrixXd& alpha) const {
    const double n = static_cast<double>(targets_.rows());
    const double n_cols = static_cast<double>(targets_.cols());
    const double data_fit = 0.5 * (targets_.cwiseProduct(alpha)).sum();
    return data_fit + 0.5 * n_cols * factor.log_det() +
           0.5 * n * n_cols * std::log(2.0 * std::numbers::pi);
  }

  const Eigen::MatrixXd& sqdist_;
  const Eigen::MatrixXd& targets_;
};

Hyperparameters params_from_log(const Eigen::VectorXd& x) {
  return Hyperparameters::from_log(x[0], x[1], x[2]);
}

}  // namespace

NlmlResult nlml(const TrainingSet& ts, const Hyperparameters& h) {
  check_training_set(ts);
  const Eigen::MatrixXd sqdist = squared_distances(ts.inputs, ts.inputs);
  NlmlObjective objective(sqdist, ts.targets);
  Eigen::Vector3d grad;
  NlmlResult res;
  res.value = objective.value_grad(h, grad);
  res.gradient = {grad[0], grad[1], grad[2]};
  return res;
}

PopulationModel fit_population(const TrainingSet& ts, const OptimizerConfig& opt,
                               const NormalizationStats& normalizer) {
  check_training_set(ts);
  if (ts.size() < 2) {
    throw InputError("fit_population requires at least 2 training rows");
  }
  if (opt.restarts < 1) {
    throw ConfigError("fit_population: restarts must be >= 1");
  }

  const Eigen::MatrixXd sqdist = squared_distances(ts.inputs, ts.inputs);
  NlmlObjective objective(sqdist, ts.targets);

  const auto eval = [&objective](const Eigen::VectorXd& x, Eigen::VectorXd* grad) -> double {
    // Line-search probes may wander to parameters whose exp() overflows or
    // whose kernel cannot be factorized; both read as +inf to the optimizer.
    try {
      const Hyperparameters h = params_from_log(x);
      if (!std::isfinite(h.signal_variance()) || !std::isfinite(h.lengthscale()) ||
          !std::isfinite(h.noise_variance())) {
        return std::numeric_limits<double>::infinity();
      }
      if (grad == nullptr) {
        return objective.value(h);
      }
      Eigen::Vector3d g;
      const double v = objective.value_grad(h, g);
      *grad = g;
      return v;
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    } catch (const InputError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  // Draw all restart initial points up front so restarts can run in any order.
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> init_dist(std::log(opt.init_low),
                                                   std::log(opt.init_high));
  std::vector<Eigen::VectorXd> inits(static_cast<std::size_t>(opt.restarts));
  for (auto& x0 : inits) {
    x0.resize(3);
    x0[0] = init_dist(rng);
    x0[1] = init_dist(rng);
    x0[2] = init_dist(rng);
  }

  std::vector<detail::MinimizeResult> results(inits.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < opt.restarts; ++r) {
    try {
      results[static_cast<std::size_t>(r)] =
          detail::minimize_bfgs(eval, inits[static_cast<std::size_t>(r)], opt.max_iterations,
                                opt.gradient_tolerance);
    } catch (const std::exception&) {
      results[static_cast<std::size_t>(r)].usable = false;
    }
  }

  int best = -1;
  for (int r = 0; r < opt.restarts; ++r) {
    const auto& cand = results[static_cast<std::size_t>(r)];
    if (!cand.usable || !std::isfinite(cand.value)) {
      continue;
    }
    if (best < 0 || cand.value < results[static_cast<std::size_t>(best)].value) {
      best = r;
    }
  }
  if (best < 0) {
    throw NumericalError("fit_population: every restart failed to factorize the kernel");
  }

  const Hyperparameters h = params_from_log(results[static_cast<std::size_t>(best)].x);
  Eigen::MatrixXd K = kernel_from_squared_distances(sqdist, h);
  SpdFactor factor = factor_spd(K, h.noise_variance(), "training kernel");
  Eigen::MatrixXd alpha = factor.solve(ts.targets);
  return PopulationModel{h,          ts.inputs,        std::move(factor), std::move(alpha),
                         normalizer, ts.horizon_count, ts.provenance};
}

StdForecast predict_sgp_std(const PopulationModel& m,
                            const Eigen::Ref<const Eigen::VectorXd>& u_star) {
  if (u_star.size() != m.train_inputs.cols()) {
    throw InputError("predict_sgp: test input has dimension " + std::to_string(u_star.size()) +
                     ", model expects " + std::to_string(m.train_inputs.cols()));
  }
  const double sf2 = m.hyper.signal_variance();
  const double ell = m.hyper.lengthscale();
  const Eigen::VectorXd d2 =
      (m.train_inputs.rowwise() - u_star.transpose()).rowwise().squaredNorm();
  const Eigen::VectorXd k_star = sf2 * (-d2.array() / (2.0 * ell * ell)).exp();

  StdForecast f;
  f.means = m.alpha.transpose() * k_star;
  const double quad = k_star.dot(m.factor.solve_vec(k_star));
  f.variance = std::clamp(sf2 - quad, 0.0, sf2);
  return f;
}

GaussianForecast destandardize(const StdForecast& f, const NormalizationStats& stats) {
  std::vector<double> means(static_cast<std::size_t>(f.means.size()));
  for (Eigen::Index i = 0; i < f.means.size(); ++i) {
    means[static_cast<std::size_t>(i)] = stats.destandardize_target(f.means[i]);
  }
  return make_forecast(std::move(means), stats.destandardize_variance(f.variance));
}

GaussianForecast predict_sgp(const PopulationModel& m,
                             const Eigen::Ref<const Eigen::VectorXd>& u_star) {
  return destandardize(predict_sgp_std(m, u_star), m.normalizer);
}

}  // namespace gpf
