#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gpforecast/cohort.hpp"
#include "gpforecast/gp.hpp"

namespace gpf {

// Half-width multiplier of the 50% confidence interval: mean +/- 0.67 sqrt(V).
inline constexpr double kCiHalfWidth = 0.67;

enum class ModelKind : int { Sgp = 0, Pgp = 1, Tgp = 2, Joint = 3 };

std::string to_string(ModelKind kind);
ModelKind model_from_string(const std::string& name);
std::vector<ModelKind> parse_model_list(const std::string& csv);

// Subject-level fold assignment; subjects never straddle folds.
struct FoldSplit {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::string>> folds;
  std::map<std::string, int> fold_of;
};

FoldSplit split_folds(const std::vector<std::string>& subject_ids, int k, std::uint64_t seed);

struct PredictionRecord {
  std::string subject_id;
  int anchor = 0;   // visit t whose data informed the forecast
  int horizon = 0;  // steps ahead, 1..H
  ModelKind model = ModelKind::Sgp;
  double mean = 0.0;
  double variance = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double truth = 0.0;   // raw score at the slot (imputed value when unobserved)
  bool truth_observed = false;
};

struct EvalSettings {
  int horizon = 4;
  std::vector<ModelKind> models = {ModelKind::Sgp, ModelKind::Pgp, ModelKind::Tgp,
                                   ModelKind::Joint};
  bool clamp_output = false;  // clip reported means to [0,85]
};

// Sequential per-visit forecasting of one held-out, imputed subject: for each
// anchor t the history is rebuilt from visits 1..t and all requested models
// emit records for the remaining horizons. With an empty history pGP, tGP and
// the joint model all fall back to the population forecast.
std::vector<PredictionRecord> evaluate_subject(const PopulationModel& m, const Subject& s,
                                               const EvalSettings& cfg);

// Mean absolute error over records with observed truth, raw score units.
double mae(std::span<const PredictionRecord> records);

// Weighted error score: absolute errors weighted by inverse CI width.
double wes(std::span<const PredictionRecord> records);

struct MetricCell {
  double mean = 0.0;
  double sd = 0.0;
  int folds = 0;
};

struct ModelMetrics {
  std::vector<MetricCell> mae_by_horizon;
  MetricCell mae_avg;
  std::vector<MetricCell> wes_by_horizon;
  MetricCell wes_avg;
  std::map<int, MetricCell> mae_by_visit_cap;
};

struct SignificanceMark {
  std::string best_model;
  std::string runner_up;
  double t_statistic = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

struct MetricReport {
  int horizon = 4;
  int n_folds = 0;
  long n_records = 0;
  long n_observed = 0;
  std::vector<ModelKind> models;
  std::vector<int> visit_caps;
  std::map<ModelKind, ModelMetrics> per_model;
  // Keyed by column: "t+1".."t+H" and "avg".
  std::map<std::string, SignificanceMark> significance_mae;
  std::map<std::string, SignificanceMark> significance_wes;
};

// Fold-wise MAE/WES tables (mean +/- SD across folds), visit-cap curves, and
// the paired t-test between the two best models per column.
MetricReport aggregate(const std::vector<PredictionRecord>& records, const FoldSplit& split,
                       const EvalSettings& cfg, const std::vector<int>& visit_caps = {5, 10, 15,
                                                                                      21});

struct PairedTTestResult {
  double t_statistic = 0.0;
  double p_value = 1.0;
  int dof = 0;
  bool valid = false;
};

// Two-sided paired t-test on matched samples.
PairedTTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

// Record stream round-trip (header: subject_id,t,h,model,mean,variance,ci_lo,
// ci_hi,truth,observed).
void save_records_csv(const std::vector<PredictionRecord>& records, const std::string& path);
std::vector<PredictionRecord> load_records_csv(const std::string& path);

}  // namespace gpf
