#include <CLI11.hpp>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "gpforecast/errors.hpp"
#include "gpforecast/experiment.hpp"
#include "gpforecast/personalize.hpp"
#include "gpforecast/version.hpp"

namespace {

using nlohmann::json;

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw gpf::ConfigError("cannot open '" + path + "' for writing");
  }
  out << content;
  if (!out) {
    throw gpf::ConfigError("failed while writing '" + path + "'");
  }
}

struct SynthArgs {
  gpf::SyntheticConfig cfg;
  std::string out_path;
};

void run_synth(const SynthArgs& args) {
  const gpf::Cohort cohort = gpf::generate_synthetic(args.cfg);
  gpf::save_cohort_csv(cohort, args.out_path);

  long cells = 0;
  long missing = 0;
  for (const auto& s : cohort.subjects) {
    for (const auto& v : s.visits) {
      cells += static_cast<long>(v.feature_observed.size()) + 1;
      for (bool obs : v.feature_observed) {
        missing += obs ? 0 : 1;
      }
      missing += v.score_observed ? 0 : 1;
    }
  }
  std::cout << "wrote " << args.out_path << ": " << cohort.subjects.size() << " subjects, "
            << args.cfg.n_visits << " visits, " << args.cfg.n_features << " features, "
            << (cells > 0 ? static_cast<double>(missing) / static_cast<double>(cells) : 0.0)
            << " missing-cell rate\n";
}

struct EvalArgs {
  gpf::ExperimentConfig cfg;
  std::string out_dir = ".";
};

void run_eval(const EvalArgs& args) {
  const gpf::Cohort cohort = gpf::load_cohort(args.cfg.data_path);
  const gpf::ExperimentResult result = gpf::run_experiment(cohort, args.cfg, &std::cerr);

  std::filesystem::create_directories(args.out_dir);
  const auto in_dir = [&](const char* name) {
    return (std::filesystem::path(args.out_dir) / name).string();
  };
  write_text_file(in_dir("report.json"), gpf::report_to_json(result.report, args.cfg));
  gpf::save_records_csv(result.records, in_dir("records.csv"));
  write_text_file(in_dir("config.json"), gpf::config_to_json(args.cfg));
  write_text_file(in_dir("imputation.json"),
                  gpf::imputation_report_to_json(result.imputation));

  gpf::print_report_tables(result.report, std::cout);
  std::cout << "report: " << in_dir("report.json") << "\nrecords: " << in_dir("records.csv")
            << "\n";
}

struct ForecastArgs {
  gpf::ExperimentConfig cfg;
  std::string subject_id;
  std::string model_name = "joint";
  std::string train_path;       // defaults to --data
  std::string model_file;       // load artifact instead of fitting
  std::string save_model_path;  // optionally persist the fitted model
  std::string out_path;         // empty -> stdout
};

void run_forecast(const ForecastArgs& args) {
  const gpf::Cohort cohort = gpf::load_cohort(args.cfg.data_path);
  const gpf::Subject* target = nullptr;
  for (const auto& s : cohort.subjects) {
    if (s.id == args.subject_id) {
      target = &s;
    }
  }
  if (target == nullptr) {
    throw gpf::ConfigError("unknown subject id '" + args.subject_id + "' in " +
                           args.cfg.data_path);
  }
  const gpf::ModelKind kind = gpf::model_from_string(args.model_name);

  std::optional<gpf::PopulationModel> model;
  std::optional<Eigen::VectorXd> imputation_means;
  if (!args.model_file.empty()) {
    model = gpf::load_model_json(args.model_file);
    // Raw fold means are not part of the artifact; the stored normalization
    // means stand in for the never-observed-feature fallback.
    imputation_means = model->normalizer.feature_means;
  } else {
    gpf::ExperimentConfig fit_cfg = args.cfg;
    fit_cfg.data_path = args.train_path.empty() ? args.cfg.data_path : args.train_path;
    const gpf::Cohort train_cohort =
        args.train_path.empty() ? cohort : gpf::load_cohort(args.train_path);
    if (train_cohort.schema.names != cohort.schema.names) {
      throw gpf::ValidationError("training cohort schema does not match target cohort");
    }
    std::vector<gpf::Subject> eligible = gpf::filter_eligible(
        train_cohort.subjects, fit_cfg.min_visits, fit_cfg.max_missing_fraction);
    imputation_means = gpf::fold_feature_means(eligible, train_cohort.schema);
    model = gpf::fit_population_from_cohort(train_cohort, fit_cfg, args.subject_id);
  }
  if (!args.save_model_path.empty()) {
    gpf::save_model_json(*model, args.save_model_path);
  }
  if (model->input_dim() != cohort.schema.dim() + 1) {
    throw gpf::ValidationError("model input dimension does not match the cohort schema");
  }

  gpf::ImputationReport imp_report;
  const gpf::Subject imputed =
      gpf::impute_locf(*target, cohort.schema, imputation_means, &imp_report);

  const int horizon = model->horizon_count;
  json anchors = json::array();
  for (int t = 1; t <= static_cast<int>(imputed.visits.size()); ++t) {
    const Eigen::VectorXd u_star = gpf::anchor_input(imputed, t, model->normalizer);
    const gpf::TargetHistory hist =
        gpf::build_target_history(imputed, t, model->normalizer, horizon);

    gpf::GaussianForecast f = [&] {
      switch (kind) {
        case gpf::ModelKind::Sgp:
          return gpf::predict_sgp(*model, u_star);
        case gpf::ModelKind::Pgp:
          return gpf::predict_pgp(*model, hist, u_star);
        case gpf::ModelKind::Tgp:
          return hist.empty() ? gpf::predict_sgp(*model, u_star)
                              : gpf::predict_tgp(model->hyper, hist, u_star, model->normalizer);
        case gpf::ModelKind::Joint: {
          const gpf::GaussianForecast pgp = gpf::predict_pgp(*model, hist, u_star);
          std::optional<gpf::GaussianForecast> tgp;
          if (!hist.empty()) {
            tgp = gpf::predict_tgp(model->hyper, hist, u_star, model->normalizer);
          }
          return gpf::predict_joint(pgp, tgp);
        }
      }
      throw gpf::InputError("unknown model kind");
    }();

    json steps = json::array();
    for (int h = 1; h <= horizon; ++h) {
      double mean = f.means[static_cast<std::size_t>(h - 1)];
      if (args.cfg.clamp_output) {
        mean = std::clamp(mean, 0.0, 85.0);
      }
      const double half = gpf::kCiHalfWidth * std::sqrt(f.variance);
      steps.push_back(json{{"step", h},
                           {"months_ahead", 6 * h},
                           {"mean", mean},
                           {"variance", f.variance},
                           {"ci_lower", mean - half},
                           {"ci_upper", mean + half}});
    }
    const bool fallback = hist.empty() && kind != gpf::ModelKind::Sgp;
    anchors.push_back(json{{"t", t},
                           {"month", imputed.visits[static_cast<std::size_t>(t - 1)].month},
                           {"population_fallback", fallback},
                           {"forecasts", steps}});
  }

  json out{{"tool", json{{"name", gpf::kToolName}, {"version", gpf::kToolVersion}}},
           {"subject", args.subject_id},
           {"model", args.model_name},
           {"horizon", horizon},
           {"clamped", args.cfg.clamp_output},
           {"anchors", anchors}};
  const std::string text = out.dump(2) + "\n";
  if (args.out_path.empty()) {
    std::cout << text;
  } else {
    write_text_file(args.out_path, text);
    std::cout << "wrote " << args.out_path << "\n";
  }
}

struct TtestArgs {
  std::string records_a;
  std::string records_b;
  std::string model_a;
  std::string model_b;
};

std::map<std::string, double> errors_by_key(const std::vector<gpf::PredictionRecord>& records,
                                            std::string& model_name) {
  std::map<std::string, double> errors;
  std::string found_model;
  for (const auto& r : records) {
    if (!r.truth_observed) {
      continue;
    }
    if (!model_name.empty() && gpf::to_string(r.model) != model_name) {
      continue;
    }
    if (found_model.empty()) {
      found_model = gpf::to_string(r.model);
    } else if (found_model != gpf::to_string(r.model)) {
      throw gpf::ConfigError(
          "record file contains multiple models; select one with --model-a/--model-b");
    }
    errors[r.subject_id + "#" + std::to_string(r.anchor) + "#" + std::to_string(r.horizon)] =
        std::abs(r.truth - r.mean);
  }
  if (errors.empty()) {
    throw gpf::MetricError("no observed-truth records" +
                           (model_name.empty() ? "" : " for model " + model_name));
  }
  model_name = found_model;
  return errors;
}

void run_ttest(const TtestArgs& args) {
  std::string model_a = args.model_a;
  std::string model_b = args.model_b;
  const auto errors_a = errors_by_key(gpf::load_records_csv(args.records_a), model_a);
  const auto errors_b = errors_by_key(gpf::load_records_csv(args.records_b), model_b);

  std::vector<double> a;
  std::vector<double> b;
  for (const auto& [key, err] : errors_a) {
    const auto it = errors_b.find(key);
    if (it != errors_b.end()) {
      a.push_back(err);
      b.push_back(it->second);
    }
  }
  if (a.size() < 2) {
    throw gpf::MetricError("fewer than 2 matched (subject, anchor, horizon) pairs");
  }
  const gpf::PairedTTestResult res = gpf::paired_ttest(a, b);

  double mean_a = 0.0;
  double mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= static_cast<double>(a.size());
  mean_b /= static_cast<double>(b.size());

  json out{{"tool", json{{"name", gpf::kToolName}, {"version", gpf::kToolVersion}}},
           {"model_a", model_a},
           {"model_b", model_b},
           {"n_pairs", a.size()},
           {"mean_abs_error_a", mean_a},
           {"mean_abs_error_b", mean_b},
           {"t_statistic", res.t_statistic},
           {"dof", res.dof},
           {"p_value", res.p_value},
           {"significant_at_0.05", res.valid && res.p_value < 0.05}};
  std::cout << out.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-process forecasting of longitudinal cognitive scores"};
  app.set_version_flag("--version", std::string(gpf::kToolVersion));
  app.set_config("--config", "", "read options from an INI config file (flags win on conflict)");
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a seeded synthetic cohort CSV");
  synth->add_option("--subjects", synth_args.cfg.n_subjects, "number of subjects")
      ->capture_default_str();
  synth->add_option("--visits", synth_args.cfg.n_visits, "visits per subject (6-month grid)")
      ->capture_default_str();
  synth->add_option("--features", synth_args.cfg.n_features, "feature count")
      ->capture_default_str();
  synth
      ->add_option("--informative-fraction", synth_args.cfg.informative_fraction,
                   "fraction of features tied to the latent trajectory")
      ->capture_default_str();
  synth->add_option("--missing-rate", synth_args.cfg.missing_rate, "per-cell missing rate")
      ->capture_default_str();
  synth->add_option("--seed", synth_args.cfg.seed, "generator seed")->capture_default_str();
  synth->add_option("--out", synth_args.out_path, "output CSV path")->required();
  synth->callback([&] { run_synth(synth_args); });

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "run the cross-validated forecasting experiment");
  eval->add_option("--data", eval_args.cfg.data_path, "cohort CSV")->required();
  eval->add_option("--folds", eval_args.cfg.folds, "fold count")->capture_default_str();
  eval->add_option("--horizon", eval_args.cfg.horizon, "forecast steps")->capture_default_str();
  std::string eval_models = "sgp,pgp,tgp,joint";
  eval->add_option("--models", eval_models, "comma-separated: sgp,pgp,tgp,joint")
      ->capture_default_str();
  eval->add_option("--seed-split", eval_args.cfg.seed_split, "fold-split seed")
      ->capture_default_str();
  eval->add_option("--seed-opt", eval_args.cfg.seed_opt, "optimizer restart seed")
      ->capture_default_str();
  eval->add_flag("--clamp", eval_args.cfg.clamp_output, "clip reported means to [0,85]");
  eval->add_option("--min-visits", eval_args.cfg.min_visits, "eligibility: minimum visits")
      ->capture_default_str();
  eval
      ->add_option("--max-missing", eval_args.cfg.max_missing_fraction,
                   "eligibility: maximum feature missingness")
      ->capture_default_str();
  eval->add_option("--restarts", eval_args.cfg.restarts, "optimizer restarts")
      ->capture_default_str();
  eval->add_option("--max-iterations", eval_args.cfg.max_iterations, "optimizer iteration cap")
      ->capture_default_str();
  eval->add_option("--out-dir", eval_args.out_dir, "output directory")->capture_default_str();
  eval->callback([&] {
    eval_args.cfg.models = gpf::parse_model_list(eval_models);
    run_eval(eval_args);
  });

  ForecastArgs fc_args;
  auto* fc = app.add_subcommand("forecast", "forecast one subject's future scores");
  fc->add_option("--data", fc_args.cfg.data_path, "cohort CSV containing the target subject")
      ->required();
  fc->add_option("--subject", fc_args.subject_id, "target subject id")->required();
  fc->add_option("--model", fc_args.model_name, "sgp, pgp, tgp or joint")
      ->capture_default_str();
  fc->add_option("--train", fc_args.train_path,
                 "training cohort CSV (defaults to --data, target excluded)");
  fc->add_option("--model-file", fc_args.model_file, "load a fitted model artifact");
  fc->add_option("--save-model", fc_args.save_model_path, "persist the fitted model as JSON");
  fc->add_option("--out", fc_args.out_path, "forecast JSON path (default: stdout)");
  fc->add_option("--horizon", fc_args.cfg.horizon, "forecast steps")->capture_default_str();
  fc->add_option("--seed-opt", fc_args.cfg.seed_opt, "optimizer restart seed")
      ->capture_default_str();
  fc->add_flag("--clamp", fc_args.cfg.clamp_output, "clip reported means to [0,85]");
  fc->add_option("--min-visits", fc_args.cfg.min_visits, "eligibility: minimum visits")
      ->capture_default_str();
  fc->add_option("--max-missing", fc_args.cfg.max_missing_fraction,
                 "eligibility: maximum feature missingness")
      ->capture_default_str();
  fc->add_option("--restarts", fc_args.cfg.restarts, "optimizer restarts")
      ->capture_default_str();
  fc->callback([&] { run_forecast(fc_args); });

  TtestArgs tt_args;
  auto* tt = app.add_subcommand("ttest", "paired t-test between two record CSVs");
  tt->add_option("records_a", tt_args.records_a, "first record CSV")->required();
  tt->add_option("records_b", tt_args.records_b, "second record CSV")->required();
  tt->add_option("--model-a", tt_args.model_a, "model to select from the first file");
  tt->add_option("--model-b", tt_args.model_b, "model to select from the second file");
  tt->callback([&] { run_ttest(tt_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const gpf::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const gpf::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const gpf::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
