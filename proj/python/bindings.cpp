#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gpforecast/eval.hpp"
#include "gpforecast/experiment.hpp"
#include "gpforecast/kernel.hpp"
#include "gpforecast/personalize.hpp"
#include "gpforecast/synthetic.hpp"
#include "gpforecast/version.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

// Array-level entry points work in standardized space directly; the identity
// normalizer makes de-standardization a no-op.
gpf::NormalizationStats identity_stats(Eigen::Index feature_dim) {
  gpf::NormalizationStats stats;
  stats.feature_means = Eigen::VectorXd::Zero(feature_dim);
  stats.feature_stds = Eigen::VectorXd::Ones(feature_dim);
  stats.target_mean = 0.0;
  stats.target_std = 1.0;
  stats.fitted_on = "identity";
  return stats;
}

gpf::TargetHistory history_from_arrays(const Eigen::MatrixXd& inputs,
                                       const Eigen::MatrixXd& targets) {
  gpf::TargetHistory hist;
  hist.inputs = inputs;
  hist.targets = targets;
  hist.subject_id = "target";
  hist.current_visit = static_cast<int>(inputs.rows());
  return hist;
}

std::vector<gpf::PredictionRecord> records_from_arrays(
    const std::vector<double>& means, const std::vector<double>& variances,
    const std::vector<double>& truths, const std::vector<bool>& observed) {
  if (means.size() != truths.size() || means.size() != observed.size() ||
      means.size() != variances.size()) {
    throw gpf::InputError("prediction arrays must share one length");
  }
  std::vector<gpf::PredictionRecord> records(means.size());
  for (std::size_t i = 0; i < means.size(); ++i) {
    auto& r = records[i];
    r.mean = means[i];
    r.variance = variances[i];
    const double half = gpf::kCiHalfWidth * std::sqrt(variances[i]);
    r.ci_lower = means[i] - half;
    r.ci_upper = means[i] + half;
    r.truth = truths[i];
    r.truth_observed = observed[i];
  }
  return records;
}

}  // namespace

PYBIND11_MODULE(pygpf, m) {
  m.doc() = "Personalized Gaussian-process forecasting of longitudinal scores";
  m.attr("__version__") = gpf::kToolVersion;

  py::register_exception<gpf::InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<gpf::ConfigError>(m, "GpfConfigError", PyExc_ValueError);
  py::register_exception<gpf::NumericalError>(m, "GpfNumericalError", PyExc_RuntimeError);

  py::class_<gpf::Hyperparameters>(m, "Hyperparameters")
      .def(py::init<double, double, double>(), "signal_variance"_a, "lengthscale"_a,
           "noise_variance"_a)
      .def_property_readonly("signal_variance", &gpf::Hyperparameters::signal_variance)
      .def_property_readonly("lengthscale", &gpf::Hyperparameters::lengthscale)
      .def_property_readonly("noise_variance", &gpf::Hyperparameters::noise_variance)
      .def("__repr__", [](const gpf::Hyperparameters& h) {
        return "Hyperparameters(signal_variance=" + std::to_string(h.signal_variance()) +
               ", lengthscale=" + std::to_string(h.lengthscale()) +
               ", noise_variance=" + std::to_string(h.noise_variance()) + ")";
      });

  py::class_<gpf::GaussianForecast>(m, "GaussianForecast")
      .def_readonly("means", &gpf::GaussianForecast::means)
      .def_readonly("variance", &gpf::GaussianForecast::variance)
      .def_readonly("horizon_months", &gpf::GaussianForecast::horizon_months);

  py::class_<gpf::PopulationModel>(m, "PopulationModel")
      .def_property_readonly("hyperparameters",
                             [](const gpf::PopulationModel& pm) { return pm.hyper; })
      .def_property_readonly("n_rows", [](const gpf::PopulationModel& pm) { return pm.size(); })
      .def_property_readonly("horizon",
                             [](const gpf::PopulationModel& pm) { return pm.horizon_count; });

  m.def("rbf", &gpf::rbf, "a"_a, "b"_a, "hyperparameters"_a,
        "Isotropic RBF kernel value between two vectors.");
  m.def(
      "kernel_matrix",
      [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const gpf::Hyperparameters& h) {
        return gpf::kernel_matrix(a, b, h);
      },
      "a"_a, "b"_a, "hyperparameters"_a);

  m.def(
      "nlml",
      [](const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
         const gpf::Hyperparameters& h) {
        gpf::TrainingSet ts;
        ts.inputs = inputs;
        ts.targets = targets;
        ts.horizon_count = static_cast<int>(targets.cols());
        const gpf::NlmlResult res = gpf::nlml(ts, h);
        return py::make_tuple(res.value,
                              std::vector<double>{res.gradient[0], res.gradient[1],
                                                  res.gradient[2]});
      },
      "inputs"_a, "targets"_a, "hyperparameters"_a,
      "Negative log marginal likelihood and its gradient in log-parameter space.");

  m.def(
      "fit_population",
      [](const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, int restarts,
         int max_iterations, std::uint64_t seed) {
        gpf::TrainingSet ts;
        ts.inputs = inputs;
        ts.targets = targets;
        ts.horizon_count = static_cast<int>(targets.cols());
        gpf::OptimizerConfig opt;
        opt.restarts = restarts;
        opt.max_iterations = max_iterations;
        opt.seed = seed;
        return gpf::fit_population(ts, opt, identity_stats(inputs.cols() - 1));
      },
      "inputs"_a, "targets"_a, "restarts"_a = 5, "max_iterations"_a = 200, "seed"_a = 0,
      "Fit a population GP on standardized rows.");

  m.def(
      "predict_sgp",
      [](const gpf::PopulationModel& pm, const Eigen::VectorXd& u) {
        return gpf::predict_sgp(pm, u);
      },
      "model"_a, "u_star"_a);
  m.def(
      "predict_pgp",
      [](const gpf::PopulationModel& pm, const Eigen::MatrixXd& hist_inputs,
         const Eigen::MatrixXd& hist_targets, const Eigen::VectorXd& u) {
        return gpf::predict_pgp(pm, history_from_arrays(hist_inputs, hist_targets), u);
      },
      "model"_a, "history_inputs"_a, "history_targets"_a, "u_star"_a);
  m.def(
      "predict_tgp",
      [](const gpf::PopulationModel& pm, const Eigen::MatrixXd& hist_inputs,
         const Eigen::MatrixXd& hist_targets, const Eigen::VectorXd& u) {
        return gpf::predict_tgp(pm.hyper, history_from_arrays(hist_inputs, hist_targets), u,
                                pm.normalizer);
      },
      "model"_a, "history_inputs"_a, "history_targets"_a, "u_star"_a);
  m.def(
      "predict_joint",
      [](const gpf::GaussianForecast& pgp, std::optional<gpf::GaussianForecast> tgp) {
        return gpf::predict_joint(pgp, tgp);
      },
      "pgp"_a, "tgp"_a = std::nullopt);

  m.def(
      "mae",
      [](const std::vector<double>& means, const std::vector<double>& variances,
         const std::vector<double>& truths, const std::vector<bool>& observed) {
        return gpf::mae(records_from_arrays(means, variances, truths, observed));
      },
      "means"_a, "variances"_a, "truths"_a, "observed"_a);
  m.def(
      "wes",
      [](const std::vector<double>& means, const std::vector<double>& variances,
         const std::vector<double>& truths, const std::vector<bool>& observed) {
        return gpf::wes(records_from_arrays(means, variances, truths, observed));
      },
      "means"_a, "variances"_a, "truths"_a, "observed"_a);

  m.def(
      "generate_synthetic_csv",
      [](const std::string& path, int n_subjects, int n_visits, int n_features,
         double informative_fraction, double missing_rate, std::uint64_t seed) {
        gpf::SyntheticConfig cfg;
        cfg.n_subjects = n_subjects;
        cfg.n_visits = n_visits;
        cfg.n_features = n_features;
        cfg.informative_fraction = informative_fraction;
        cfg.missing_rate = missing_rate;
        cfg.seed = seed;
        gpf::save_cohort_csv(gpf::generate_synthetic(cfg), path);
      },
      "path"_a, "n_subjects"_a = 100, "n_visits"_a = 12, "n_features"_a = 20,
      "informative_fraction"_a = 0.5, "missing_rate"_a = 0.0, "seed"_a = 0);

  m.def(
      "run_experiment_json",
      [](const std::string& data_path, int folds, const std::string& models,
         std::uint64_t seed_split, std::uint64_t seed_opt, int restarts, int min_visits,
         double max_missing) {
        gpf::ExperimentConfig cfg;
        cfg.data_path = data_path;
        cfg.folds = folds;
        cfg.models = gpf::parse_model_list(models);
        cfg.seed_split = seed_split;
        cfg.seed_opt = seed_opt;
        cfg.restarts = restarts;
        cfg.min_visits = min_visits;
        cfg.max_missing_fraction = max_missing;
        const gpf::Cohort cohort = gpf::load_cohort(data_path);
        const gpf::ExperimentResult result = gpf::run_experiment(cohort, cfg);
        return gpf::report_to_json(result.report, cfg);
      },
      "data_path"_a, "folds"_a = 10, "models"_a = "sgp,pgp,tgp,joint", "seed_split"_a = 0,
      "seed_opt"_a = 0, "restarts"_a = 5, "min_visits"_a = 11, "max_missing"_a = 0.825,
      "Run the full cross-validation protocol; returns the metric report as JSON.");
}
