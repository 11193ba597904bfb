#include "gpforecast/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "gpforecast/errors.hpp"
#include "gpforecast/kernel.hpp"
#include "gpforecast/version.hpp"

namespace gpf {

namespace {

using nlohmann::json;

std::uint64_t fold_seed(std::uint64_t base, int fold) {
  return base + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(fold + 1);
}

json cell_to_json(const MetricCell& c) {
  return json{{"mean", c.mean}, {"sd", c.sd}, {"folds", c.folds}};
}

json mark_to_json(const SignificanceMark& m) {
  return json{{"best_model", m.best_model},
              {"runner_up", m.runner_up},
              {"t_statistic", m.t_statistic},
              {"p_value", m.p_value},
              {"significant", m.significant}};
}

json tool_json() {
  return json{{"name", kToolName}, {"version", kToolVersion}};
}

json config_json(const ExperimentConfig& cfg) {
  json models = json::array();
  for (ModelKind m : cfg.models) {
    models.push_back(to_string(m));
  }
  json j{{"data", cfg.data_path},
         {"folds", cfg.folds},
         {"horizon", cfg.horizon},
         {"models", models},
         {"seed_split", cfg.seed_split},
         {"seed_opt", cfg.seed_opt},
         {"clamp_output", cfg.clamp_output},
         {"min_visits", cfg.min_visits},
         {"max_missing_fraction", cfg.max_missing_fraction},
         {"restarts", cfg.restarts},
         {"max_iterations", cfg.max_iterations}};
  if (cfg.use_synth) {
    j["synth"] = json{{"n_subjects", cfg.synth.n_subjects},
                      {"n_visits", cfg.synth.n_visits},
                      {"n_features", cfg.synth.n_features},
                      {"informative_fraction", cfg.synth.informative_fraction},
                      {"missing_rate", cfg.synth.missing_rate},
                      {"seed", cfg.synth.seed}};
  }
  return j;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (folds < 2) {
    throw ConfigError("folds must be >= 2");
  }
  if (horizon < 1) {
    throw ConfigError("horizon must be >= 1");
  }
  if (models.empty()) {
    throw ConfigError("at least one model is required");
  }
  if (min_visits < 1) {
    throw ConfigError("min_visits must be >= 1");
  }
  if (max_missing_fraction < 0.0 || max_missing_fraction > 1.0) {
    throw ConfigError("max_missing_fraction must lie in [0,1]");
  }
  if (restarts < 1) {
    throw ConfigError("restarts must be >= 1");
  }
  if (max_iterations < 1) {
    throw ConfigError("max_iterations must be >= 1");
  }
}

ExperimentResult run_experiment(const Cohort& cohort, const ExperimentConfig& cfg,
                                std::ostream* progress) {
  cfg.validate();
  const std::vector<Subject> eligible =
      filter_eligible(cohort.subjects, cfg.min_visits, cfg.max_missing_fraction);
  if (eligible.size() < static_cast<std::size_t>(cfg.folds)) {
    throw ConfigError("only " + std::to_string(eligible.size()) +
                      " eligible subjects for " + std::to_string(cfg.folds) + " folds");
  }

  std::map<std::string, const Subject*> by_id;
  std::vector<std::string> ids;
  for (const auto& s : eligible) {
    by_id.emplace(s.id, &s);
    ids.push_back(s.id);
  }

  ExperimentResult result;
  result.split = split_folds(ids, cfg.folds, cfg.seed_split);

  EvalSettings settings;
  settings.horizon = cfg.horizon;
  settings.models = cfg.models;
  settings.clamp_output = cfg.clamp_output;

  std::vector<std::vector<PredictionRecord>> fold_records(
      static_cast<std::size_t>(cfg.folds));
  std::vector<ImputationReport> fold_reports(static_cast<std::size_t>(cfg.folds));
  std::vector<std::string> fold_errors(static_cast<std::size_t>(cfg.folds));

#pragma omp parallel for schedule(dynamic, 1)
  for (int f = 0; f < cfg.folds; ++f) {
    try {
      std::vector<Subject> train;
      for (const auto& s : eligible) {
        if (result.split.fold_of.at(s.id) != f) {
          train.push_back(s);
        }
      }
      const Eigen::VectorXd means = fold_feature_means(train, cohort.schema);
      std::vector<Subject> train_imputed;
      train_imputed.reserve(train.size());
      for (const auto& s : train) {
        train_imputed.push_back(impute_locf(s, cohort.schema, means, nullptr));
      }
      const NormalizationStats stats =
          fit_normalizer(train_imputed, cohort.schema, "fold" + std::to_string(f));
      const TrainingSet ts = build_training_rows(train_imputed, stats, cfg.horizon);

      OptimizerConfig opt;
      opt.restarts = cfg.restarts;
      opt.max_iterations = cfg.max_iterations;
      opt.seed = fold_seed(cfg.seed_opt, f);
      const PopulationModel model = fit_population(ts, opt, stats);

      auto& records = fold_records[static_cast<std::size_t>(f)];
      for (const auto& id : result.split.folds[static_cast<std::size_t>(f)]) {
        const Subject imputed = impute_locf(*by_id.at(id), cohort.schema, means,
                                            &fold_reports[static_cast<std::size_t>(f)]);
        auto recs = evaluate_subject(model, imputed, settings);
        records.insert(records.end(), std::make_move_iterator(recs.begin()),
                       std::make_move_iterator(recs.end()));
      }
      if (progress != nullptr) {
#pragma omp critical(gpf_progress)
        {
          (*progress) << "fold " << f << ": " << ts.size() << " training rows, "
                      << records.size() << " records\n";
          progress->flush();
        }
      }
    } catch (const std::exception& e) {
      fold_errors[static_cast<std::size_t>(f)] = e.what();
    }
  }

  for (int f = 0; f < cfg.folds; ++f) {
    if (!fold_errors[static_cast<std::size_t>(f)].empty()) {
      throw NumericalError("fold " + std::to_string(f) + ": " +
                           fold_errors[static_cast<std::size_t>(f)]);
    }
    auto& recs = fold_records[static_cast<std::size_t>(f)];
    result.records.insert(result.records.end(), std::make_move_iterator(recs.begin()),
                          std::make_move_iterator(recs.end()));
    for (auto& [subject, cells] : fold_reports[static_cast<std::size_t>(f)].per_subject) {
      result.imputation.per_subject[subject] = std::move(cells);
    }
  }

  result.report = aggregate(result.records, result.split, settings);
  return result;
}

PopulationModel fit_population_from_cohort(const Cohort& cohort, const ExperimentConfig& cfg,
                                           const std::string& exclude_subject,
                                           ImputationReport* report) {
  cfg.validate();
  std::vector<Subject> train =
      filter_eligible(cohort.subjects, cfg.min_visits, cfg.max_missing_fraction);
  train.erase(std::remove_if(train.begin(), train.end(),
                             [&](const Subject& s) { return s.id == exclude_subject; }),
              train.end());
  if (train.empty()) {
    throw ConfigError("no eligible training subjects");
  }

  const Eigen::VectorXd means = fold_feature_means(train, cohort.schema);
  std::vector<Subject> imputed;
  imputed.reserve(train.size());
  for (const auto& s : train) {
    imputed.push_back(impute_locf(s, cohort.schema, means, report));
  }
  const NormalizationStats stats = fit_normalizer(imputed, cohort.schema, "all");
  const TrainingSet ts = build_training_rows(imputed, stats, cfg.horizon);

  OptimizerConfig opt;
  opt.restarts = cfg.restarts;
  opt.max_iterations = cfg.max_iterations;
  opt.seed = cfg.seed_opt;
  return fit_population(ts, opt, stats);
}

std::string config_to_json(const ExperimentConfig& cfg) {
  return config_json(cfg).dump(2) + "\n";
}

std::string report_to_json(const MetricReport& report, const ExperimentConfig& cfg) {
  json models;
  for (const auto& [kind, metrics] : report.per_model) {
    json mae_cols;
    json wes_cols;
    for (int h = 1; h <= report.horizon; ++h) {
      mae_cols["t+" + std::to_string(h)] =
          cell_to_json(metrics.mae_by_horizon[static_cast<std::size_t>(h - 1)]);
      wes_cols["t+" + std::to_string(h)] =
          cell_to_json(metrics.wes_by_horizon[static_cast<std::size_t>(h - 1)]);
    }
    mae_cols["avg"] = cell_to_json(metrics.mae_avg);
    wes_cols["avg"] = cell_to_json(metrics.wes_avg);
    json caps;
    for (const auto& [cap, cell] : metrics.mae_by_visit_cap) {
      caps[std::to_string(cap)] = cell_to_json(cell);
    }
    models[to_string(kind)] =
        json{{"mae", mae_cols}, {"wes", wes_cols}, {"mae_by_visit_cap", caps}};
  }

  json sig_mae;
  for (const auto& [column, mark] : report.significance_mae) {
    sig_mae[column] = mark_to_json(mark);
  }
  json sig_wes;
  for (const auto& [column, mark] : report.significance_wes) {
    sig_wes[column] = mark_to_json(mark);
  }

  json j{{"tool", tool_json()},
         {"config", config_json(cfg)},
         {"horizon", report.horizon},
         {"n_folds", report.n_folds},
         {"n_records", report.n_records},
         {"n_observed", report.n_observed},
         {"visit_caps", report.visit_caps},
         {"models", models},
         {"significance", json{{"mae", sig_mae}, {"wes", sig_wes}}}};
  return j.dump(2) + "\n";
}

std::string imputation_report_to_json(const ImputationReport& report) {
  json subjects = json::object();
  for (const auto& [subject, cells] : report.per_subject) {
    json list = json::array();
    for (const auto& cell : cells) {
      list.push_back(json{{"month", cell.month}, {"field", cell.field}, {"method", cell.method}});
    }
    subjects[subject] = list;
  }
  json j{{"tool", tool_json()}, {"subjects", subjects}};
  return j.dump(2) + "\n";
}

void save_model_json(const PopulationModel& m, const std::string& path) {
  // Targets are recovered from alpha by multiplying back through the
  // factorized kernel, so the artifact stays a plain data + theta description.
  const Eigen::MatrixXd target_matrix =
      m.factor.matrix_l() * (m.factor.matrix_l().transpose() * m.alpha);

  json inputs = json::array();
  json targets = json::array();
  for (Eigen::Index i = 0; i < m.train_inputs.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.train_inputs.cols(); ++j) {
      row.push_back(m.train_inputs(i, j));
    }
    inputs.push_back(std::move(row));
    json trow = json::array();
    for (Eigen::Index j = 0; j < target_matrix.cols(); ++j) {
      trow.push_back(target_matrix(i, j));
    }
    targets.push_back(std::move(trow));
  }

  json provenance = json::array();
  for (const auto& p : m.provenance) {
    provenance.push_back(json{{"subject", p.subject_id}, {"visit", p.visit_index}});
  }

  json norm{{"feature_means", std::vector<double>(m.normalizer.feature_means.begin(),
                                                  m.normalizer.feature_means.end())},
            {"feature_stds", std::vector<double>(m.normalizer.feature_stds.begin(),
                                                 m.normalizer.feature_stds.end())},
            {"target_mean", m.normalizer.target_mean},
            {"target_std", m.normalizer.target_std},
            {"fitted_on", m.normalizer.fitted_on}};

  json j{{"tool", tool_json()},
         {"kind", "population_gp"},
         {"hyperparameters",
          json{{"signal_variance", m.hyper.signal_variance()},
               {"lengthscale", m.hyper.lengthscale()},
               {"noise_variance", m.hyper.noise_variance()}}},
         {"horizon", m.horizon_count},
         {"normalizer", norm},
         {"training_rows",
          json{{"inputs", inputs}, {"targets", targets}, {"provenance", provenance}}}};

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ConfigError("cannot open '" + path + "' for writing");
  }
  out << j.dump(2) << "\n";
  if (!out) {
    throw ConfigError("failed while writing '" + path + "'");
  }
}

PopulationModel load_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open model file '" + path + "'");
  }
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ParseError(std::string("invalid model JSON: ") + e.what(), 0);
  }

  try {
    if (j.at("kind").get<std::string>() != "population_gp") {
      throw ValidationError("model file is not a population_gp artifact");
    }
    const auto& hp = j.at("hyperparameters");
    const Hyperparameters hyper(hp.at("signal_variance").get<double>(),
                                hp.at("lengthscale").get<double>(),
                                hp.at("noise_variance").get<double>());

    const auto& rows = j.at("training_rows");
    const auto& inputs_json = rows.at("inputs");
    const auto& targets_json = rows.at("targets");
    const auto n = static_cast<Eigen::Index>(inputs_json.size());
    if (n == 0) {
      throw ValidationError("model artifact has no training rows");
    }
    const auto dim = static_cast<Eigen::Index>(inputs_json.at(0).size());
    const int horizon = j.at("horizon").get<int>();

    TrainingSet ts;
    ts.horizon_count = horizon;
    ts.inputs.resize(n, dim);
    ts.targets.resize(n, horizon);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < dim; ++c) {
        ts.inputs(i, c) = inputs_json.at(static_cast<std::size_t>(i))
                              .at(static_cast<std::size_t>(c))
                              .get<double>();
      }
      for (int h = 0; h < horizon; ++h) {
        ts.targets(i, h) = targets_json.at(static_cast<std::size_t>(i))
                               .at(static_cast<std::size_t>(h))
                               .get<double>();
      }
    }
    for (const auto& p : rows.at("provenance")) {
      ts.provenance.push_back(
          RowProvenance{p.at("subject").get<std::string>(), p.at("visit").get<int>()});
    }

    NormalizationStats stats;
    const auto& norm = j.at("normalizer");
    const auto fm = norm.at("feature_means").get<std::vector<double>>();
    const auto fs = norm.at("feature_stds").get<std::vector<double>>();
    stats.feature_means = Eigen::Map<const Eigen::VectorXd>(fm.data(),
                                                            static_cast<Eigen::Index>(fm.size()));
    stats.feature_stds = Eigen::Map<const Eigen::VectorXd>(fs.data(),
                                                           static_cast<Eigen::Index>(fs.size()));
    stats.target_mean = norm.at("target_mean").get<double>();
    stats.target_std = norm.at("target_std").get<double>();
    stats.fitted_on = norm.at("fitted_on").get<std::string>();

    const Eigen::MatrixXd k = kernel_matrix(ts.inputs, ts.inputs, hyper);
    SpdFactor factor = factor_spd(k, hyper.noise_variance(), "training kernel");
    Eigen::MatrixXd alpha = factor.solve(ts.targets);
    return PopulationModel{hyper,  ts.inputs, std::move(factor), std::move(alpha),
                           stats,  horizon,   ts.provenance};
  } catch (const json::exception& e) {
    throw ParseError(std::string("model JSON missing fields: ") + e.what(), 0);
  }
}

void print_report_tables(const MetricReport& report, std::ostream& out) {
  const auto print_table = [&](const char* title, bool use_wes,
                               const std::map<std::string, SignificanceMark>& marks) {
    out << title << " (mean±SD over " << report.n_folds << " folds)\n";
    out << std::left << std::setw(8) << "model";
    for (int h = 1; h <= report.horizon; ++h) {
      out << std::setw(14) << ("t+" + std::to_string(h));
    }
    out << std::setw(14) << "avg" << "\n";
    for (ModelKind kind : report.models) {
      const auto& metrics = report.per_model.at(kind);
      out << std::setw(8) << to_string(kind);
      const auto print_cell = [&](const MetricCell& cell, const std::string& column) {
        std::ostringstream oss;
        oss << std::fixed << std::setprecision(2) << cell.mean << "±" << cell.sd;
        const auto it = marks.find(column);
        if (it != marks.end() && it->second.significant &&
            it->second.best_model == to_string(kind)) {
          oss << "*";
        }
        out << std::setw(14) << oss.str();
      };
      for (int h = 1; h <= report.horizon; ++h) {
        print_cell(use_wes ? metrics.wes_by_horizon[static_cast<std::size_t>(h - 1)]
                           : metrics.mae_by_horizon[static_cast<std::size_t>(h - 1)],
                   "t+" + std::to_string(h));
      }
      print_cell(use_wes ? metrics.wes_avg : metrics.mae_avg, "avg");
      out << "\n";
    }
  };
  print_table("MAE", false, report.significance_mae);
  out << "\n";
  print_table("WES", true, report.significance_wes);
  out << "\n'*' marks a significant paired t-test (p<0.05) between the two best models.\n";
}

}  // namespace gpf
