#pragma once

#include <iosfwd>
#include <string>

#include "gpforecast/eval.hpp"
#include "gpforecast/synthetic.hpp"

namespace gpf {

// Resolved settings of one cross-validation run. Serializes to JSON and is
// echoed into the output directory so results are self-describing.
struct ExperimentConfig {
  std::string data_path;  // cohort CSV; empty when `synth` is used instead
  bool use_synth = false;
  SyntheticConfig synth;

  int folds = 10;
  int horizon = 4;
  std::vector<ModelKind> models = {ModelKind::Sgp, ModelKind::Pgp, ModelKind::Tgp,
                                   ModelKind::Joint};
  std::uint64_t seed_split = 0;
  std::uint64_t seed_opt = 0;
  bool clamp_output = false;

  int min_visits = 11;
  double max_missing_fraction = 0.825;
  int restarts = 5;
  int max_iterations = 200;

  void validate() const;
};

struct ExperimentResult {
  MetricReport report;
  std::vector<PredictionRecord> records;
  ImputationReport imputation;  // test-subject imputations, keyed by subject
  FoldSplit split;
};

// Full protocol: eligibility filter, subject-independent fold split, per-fold
// population fit on the training subjects, sequential evaluation of each
// held-out subject with all requested models, and metric aggregation. Folds
// run in parallel; output order does not depend on scheduling.
ExperimentResult run_experiment(const Cohort& cohort, const ExperimentConfig& cfg,
                                std::ostream* progress = nullptr);

// Fit one population model on every eligible subject of the cohort except
// `exclude_subject` (the forecasting path for a known target subject).
PopulationModel fit_population_from_cohort(const Cohort& cohort, const ExperimentConfig& cfg,
                                           const std::string& exclude_subject = "",
                                           ImputationReport* report = nullptr);

// JSON serialization. All output embeds the tool version and, for reports,
// the resolved configuration that produced it.
std::string config_to_json(const ExperimentConfig& cfg);
std::string report_to_json(const MetricReport& report, const ExperimentConfig& cfg);
std::string imputation_report_to_json(const ImputationReport& report);

// Portable text artifact of a fitted model: hyperparameters, normalization
// statistics and the training rows. Loading rebuilds the kernel factor.
void save_model_json(const PopulationModel& m, const std::string& path);
PopulationModel load_model_json(const std::string& path);

// Human-readable MAE/WES tables, one row per model, stars on significant
// best-model columns.
void print_report_tables(const MetricReport& report, std::ostream& out);

}  // namespace gpf
