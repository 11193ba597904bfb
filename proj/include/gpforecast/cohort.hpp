#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gpforecast/normalize.hpp"
#include "gpforecast/training.hpp"

namespace gpf {

// Ordered feature columns with their modality tags. CSV ingest derives the
// schema from the header; modalities default to "other" unless provided.
struct FeatureSchema {
  std::vector<std::string> names;
  std::vector<std::string> modalities;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(names.size()); }
  static FeatureSchema with_names(std::vector<std::string> names);
};

// One 6-month visit slot. Missing cells are NaN with the matching observed
// flag cleared; after imputation every cell is finite and the flags record
// which values were measured rather than filled.
struct Visit {
  int month = 0;
  Eigen::VectorXd features;
  std::vector<bool> feature_observed;
  double score = 0.0;
  bool score_observed = false;
  bool observed = false;  // real visit, as opposed to an imputed grid slot
};

struct Subject {
  std::string id;
  std::vector<Visit> visits;  // sorted by month; dense 6-month grid once imputed

  int observed_visit_count() const;
  // Fraction of feature cells missing across the observed visits.
  double feature_missing_fraction() const;
};

struct Cohort {
  FeatureSchema schema;
  std::vector<Subject> subjects;
};

// Cells filled by something other than plain carry-forward, per subject.
struct ImputedCell {
  int month = 0;
  std::string field;   // feature name or "adas13"
  std::string method;  // "backfill" | "fold_mean"
};

struct ImputationReport {
  std::map<std::string, std::vector<ImputedCell>> per_subject;
};

// CSV ingest. Header must be `subject_id,month,adas13,<feature names...>`;
// empty cells are missing values. Visits come back sorted by month.
Cohort load_cohort(const std::string& path,
                   const std::optional<FeatureSchema>& expected_schema = std::nullopt);

void save_cohort_csv(const Cohort& cohort, const std::string& path);

// Last-observation-carried-forward over a dense 6-month grid from the first
// to the last visit. Interior gaps take the nearest past value; leading gaps
// backfill from the first observed value; features never observed for the
// subject fall back to the supplied fold-level means. Only backfills and
// mean-fills land in the report.
Subject impute_locf(const Subject& s, const FeatureSchema& schema,
                    const std::optional<Eigen::VectorXd>& fold_feature_means = std::nullopt,
                    ImputationReport* report = nullptr);

// Per-feature means over raw observed cells, for the fold_mean fallback.
Eigen::VectorXd fold_feature_means(const std::vector<Subject>& subjects,
                                   const FeatureSchema& schema);

// z-normalization statistics over the observed visits of the given (already
// imputed) subjects. Constant columns record std = 1.
NormalizationStats fit_normalizer(const std::vector<Subject>& subjects,
                                  const FeatureSchema& schema, const std::string& fold_id = "");

// Standardized [features_t, score_t] input for anchor visit t (1-based).
Eigen::VectorXd anchor_input(const Subject& s, int t, const NormalizationStats& stats);

// Full-window supervised rows from every subject: anchor t contributes iff
// t+H <= T, so a subject with T gridded visits yields max(0, T-H) rows.
TrainingSet build_training_rows(const std::vector<Subject>& subjects,
                                const NormalizationStats& stats, int horizon);

// Conditioning rows for one subject at its current visit, same full-window
// rule: a row at anchor tau needs tau+H <= current_visit.
TargetHistory build_target_history(const Subject& s, int current_visit,
                                   const NormalizationStats& stats, int horizon);

// Cohort eligibility mirror: minimum observed visits, maximum feature
// missingness.
std::vector<Subject> filter_eligible(const std::vector<Subject>& subjects, int min_visits,
                                     double max_missing_fraction);

}  // namespace gpf
