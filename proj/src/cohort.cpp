#include "gpforecast/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "format.hpp"
#include "gpforecast/errors.hpp"

namespace gpf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kVisitStrideMonths = 6;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    cells.emplace_back();
  }
  return cells;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') {
    s.pop_back();
  }
  return s;
}

double parse_cell_double(const std::string& cell, std::size_t line, const std::string& what) {
  try {
    std::size_t consumed = 0;
    const double v = std::stod(cell, &consumed);
    if (consumed != cell.size()) {
      throw std::invalid_argument("trailing characters");
    }
    return v;
  } catch (const std::exception&) {
    throw ParseError("cannot parse " + what + " value '" + cell + "'", line);
  }
}

}  // namespace

FeatureSchema FeatureSchema::with_names(std::vector<std::string> names) {
  FeatureSchema schema;
  schema.modalities.assign(names.size(), "other");
  schema.names = std::move(names);
  std::set<std::string> unique(schema.names.begin(), schema.names.end());
  if (unique.size() != schema.names.size()) {
    throw ValidationError("feature schema contains duplicate names");
  }
  return schema;
}

int Subject::observed_visit_count() const {
  int n = 0;
  for (const auto& v : visits) {
    n += v.observed ? 1 : 0;
  }
  return n;
}

double Subject::feature_missing_fraction() const {
  long total = 0;
  long missing = 0;
  for (const auto& v : visits) {
    if (!v.observed) {
      continue;
    }
    total += static_cast<long>(v.feature_observed.size());
    for (bool obs : v.feature_observed) {
      missing += obs ? 0 : 1;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(missing) / static_cast<double>(total);
}

Cohort load_cohort(const std::string& path, const std::optional<FeatureSchema>& expected_schema) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open cohort file '" + path + "'");
  }

  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("cohort file is empty", 1);
  }
  auto header = split_csv_line(strip_cr(line));
  if (header.size() < 3 || header[0] != "subject_id" || header[1] != "month" ||
      header[2] != "adas13") {
    throw ParseError("header must start with subject_id,month,adas13", 1);
  }

  Cohort cohort;
  cohort.schema = FeatureSchema::with_names({header.begin() + 3, header.end()});
  if (expected_schema.has_value() && expected_schema->names != cohort.schema.names) {
    throw ValidationError("cohort file header does not match the expected feature schema");
  }
  const Eigen::Index dim = cohort.schema.dim();

  std::map<std::string, std::size_t> index_of;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) {
      continue;
    }
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " cells, found " +
                       std::to_string(cells.size()), line_no);
    }

    Visit visit;
    visit.observed = true;
    const double month_value = parse_cell_double(cells[1], line_no, "month");
    if (month_value != std::floor(month_value) ||
        static_cast<long>(month_value) % kVisitStrideMonths != 0 || month_value < 0) {
      throw ValidationError("month " + cells[1] + " is not a non-negative multiple of 6 (line " +
                            std::to_string(line_no) + ")");
    }
    visit.month = static_cast<int>(month_value);

    if (cells[2].empty()) {
      visit.score = kNaN;
      visit.score_observed = false;
    } else {
      visit.score = parse_cell_double(cells[2], line_no, "adas13");
      visit.score_observed = true;
      if (visit.score < 0.0 || visit.score > 85.0) {
        throw ValidationError("adas13 score " + cells[2] + " outside [0,85] (line " +
                              std::to_string(line_no) + ")");
      }
    }

    visit.features.resize(dim);
    visit.feature_observed.assign(static_cast<std::size_t>(dim), false);
    for (Eigen::Index j = 0; j < dim; ++j) {
      const auto& cell = cells[static_cast<std::size_t>(j) + 3];
      if (cell.empty()) {
        visit.features[j] = kNaN;
      } else {
        visit.features[j] = parse_cell_double(cell, line_no, cohort.schema.names[j]);
        visit.feature_observed[static_cast<std::size_t>(j)] = true;
      }
    }

    const std::string& id = cells[0];
    if (id.empty()) {
      throw ParseError("empty subject_id", line_no);
    }
    auto it = index_of.find(id);
    if (it == index_of.end()) {
      index_of.emplace(id, cohort.subjects.size());
      cohort.subjects.push_back(Subject{id, {}});
      it = index_of.find(id);
    }
    auto& visits = cohort.subjects[it->second].visits;
    for (const auto& existing : visits) {
      if (existing.month == visit.month) {
        throw ValidationError("duplicate visit at month " + std::to_string(visit.month) +
                              " for subject " + id + " (line " + std::to_string(line_no) + ")");
      }
    }
    visits.push_back(std::move(visit));
  }

  for (auto& subject : cohort.subjects) {
    std::sort(subject.visits.begin(), subject.visits.end(),
              [](const Visit& a, const Visit& b) { return a.month < b.month; });
  }
  return cohort;
}

void save_cohort_csv(const Cohort& cohort, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ConfigError("cannot open '" + path + "' for writing");
  }
  out << "subject_id,month,adas13";
  for (const auto& name : cohort.schema.names) {
    out << ',' << name;
  }
  out << '\n';
  for (const auto& subject : cohort.subjects) {
    for (const auto& visit : subject.visits) {
      if (!visit.observed) {
        continue;
      }
      out << subject.id << ',' << visit.month << ',';
      if (visit.score_observed) {
        out << detail::format_double(visit.score);
      }
      for (Eigen::Index j = 0; j < visit.features.size(); ++j) {
        out << ',';
        if (visit.feature_observed[static_cast<std::size_t>(j)]) {
          out << detail::format_double(visit.features[j]);
        }
      }
      out << '\n';
    }
  }
  if (!out) {
    throw ConfigError("failed while writing '" + path + "'");
  }
}

Subject impute_locf(const Subject& s, const FeatureSchema& schema,
                    const std::optional<Eigen::VectorXd>& fold_feature_means,
                    ImputationReport* report) {
  if (s.visits.empty()) {
    throw InputError("impute_locf: subject " + s.id + " has no visits");
  }
  const Eigen::Index dim = schema.dim();
  bool any_score = false;
  for (const auto& v : s.visits) {
    any_score = any_score || v.score_observed;
  }
  if (!any_score) {
    throw InputError("impute_locf: subject " + s.id + " has no observed score");
  }

  auto record = [&](int month, const std::string& field, const char* method) {
    if (report != nullptr) {
      report->per_subject[s.id].push_back(ImputedCell{month, field, method});
    }
  };

  // Dense grid between the first and last visit.
  Subject out;
  out.id = s.id;
  const int first = s.visits.front().month;
  const int last = s.visits.back().month;
  std::size_t src = 0;
  for (int month = first; month <= last; month += kVisitStrideMonths) {
    if (src < s.visits.size() && s.visits[src].month == month) {
      out.visits.push_back(s.visits[src]);
      ++src;
    } else {
      Visit filler;
      filler.month = month;
      filler.observed = false;
      filler.score = kNaN;
      filler.score_observed = false;
      filler.features = Eigen::VectorXd::Constant(dim, kNaN);
      filler.feature_observed.assign(static_cast<std::size_t>(dim), false);
      out.visits.push_back(std::move(filler));
    }
  }
  if (src != s.visits.size()) {
    throw ValidationError("impute_locf: subject " + s.id + " has visits off the 6-month grid");
  }

  // Carry each field forward; leading gaps take the first observed value.
  auto fill_column = [&](const std::string& field, auto get, auto set, auto is_obs) {
    int first_observed = -1;
    for (std::size_t i = 0; i < out.visits.size(); ++i) {
      if (is_obs(out.visits[i])) {
        first_observed = static_cast<int>(i);
        break;
      }
    }
    if (first_observed < 0) {
      return false;
    }
    const double lead_value = get(out.visits[static_cast<std::size_t>(first_observed)]);
    for (int i = 0; i < first_observed; ++i) {
      set(out.visits[static_cast<std::size_t>(i)], lead_value);
      record(out.visits[static_cast<std::size_t>(i)].month, field, "backfill");
    }
    double carry = lead_value;
    for (std::size_t i = static_cast<std::size_t>(first_observed); i < out.visits.size(); ++i) {
      if (is_obs(out.visits[i])) {
        carry = get(out.visits[i]);
      } else {
        set(out.visits[i], carry);
      }
    }
    return true;
  };

  fill_column(
      "adas13", [](const Visit& v) { return v.score; },
      [](Visit& v, double value) { v.score = value; },
      [](const Visit& v) { return v.score_observed; });

  for (Eigen::Index j = 0; j < dim; ++j) {
    const bool filled = fill_column(
        schema.names[static_cast<std::size_t>(j)], [j](const Visit& v) { return v.features[j]; },
        [j](Visit& v, double value) { v.features[j] = value; },
        [j](const Visit& v) { return v.feature_observed[static_cast<std::size_t>(j)]; });
    if (!filled) {
      // Feature never observed for this subject: fall back to the fold mean.
      if (!fold_feature_means.has_value() || fold_feature_means->size() != dim) {
        throw InputError("impute_locf: feature '" + schema.names[static_cast<std::size_t>(j)] +
                         "' never observed for subject " + s.id +
                         " and no fold-level means were provided");
      }
      for (auto& v : out.visits) {
        v.features[j] = (*fold_feature_means)[j];
        record(v.month, schema.names[static_cast<std::size_t>(j)], "fold_mean");
      }
    }
  }
  return out;
}

Eigen::VectorXd fold_feature_means(const std::vector<Subject>& subjects,
                                   const FeatureSchema& schema) {
  const Eigen::Index dim = schema.dim();
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(dim);
  for (const auto& s : subjects) {
    for (const auto& v : s.visits) {
      if (!v.observed) {
        continue;
      }
      for (Eigen::Index j = 0; j < dim; ++j) {
        if (v.feature_observed[static_cast<std::size_t>(j)]) {
          sums[j] += v.features[j];
          counts[j] += 1.0;
        }
      }
    }
  }
  Eigen::VectorXd means(dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    // A column never observed anywhere in the fold centers at zero.
    means[j] = counts[j] > 0.0 ? sums[j] / counts[j] : 0.0;
  }
  return means;
}

NormalizationStats fit_normalizer(const std::vector<Subject>& subjects,
                                  const FeatureSchema& schema, const std::string& fold_id) {
  if (subjects.empty()) {
    throw InputError("fit_normalizer: empty training fold");
  }
  const Eigen::Index dim = schema.dim();

  // Statistics run over the observed visit rows only; within those rows the
  // post-imputation cell values are used.
  long n = 0;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(dim);
  double t_sum = 0.0;
  double t_sum_sq = 0.0;
  for (const auto& s : subjects) {
    for (const auto& v : s.visits) {
      if (!v.observed) {
        continue;
      }
      if (!v.features.allFinite() || !std::isfinite(v.score)) {
        throw InputError("fit_normalizer: subject " + s.id + " has missing cells; impute first");
      }
      ++n;
      sum += v.features;
      sum_sq += v.features.cwiseProduct(v.features);
      t_sum += v.score;
      t_sum_sq += v.score * v.score;
    }
  }
  if (n == 0) {
    throw InputError("fit_normalizer: training fold has no observed visits");
  }

  NormalizationStats stats;
  stats.fitted_on = fold_id;
  stats.feature_means = sum / static_cast<double>(n);
  stats.feature_stds.resize(dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    const double var =
        sum_sq[j] / static_cast<double>(n) - stats.feature_means[j] * stats.feature_means[j];
    const double sd = std::sqrt(std::max(var, 0.0));
    stats.feature_stds[j] = sd > 0.0 ? sd : 1.0;
  }
  stats.target_mean = t_sum / static_cast<double>(n);
  const double t_var =
      t_sum_sq / static_cast<double>(n) - stats.target_mean * stats.target_mean;
  const double t_sd = std::sqrt(std::max(t_var, 0.0));
  stats.target_std = t_sd > 0.0 ? t_sd : 1.0;
  return stats;
}

Eigen::VectorXd anchor_input(const Subject& s, int t, const NormalizationStats& stats) {
  if (t < 1 || static_cast<std::size_t>(t) > s.visits.size()) {
    throw InputError("anchor_input: visit index " + std::to_string(t) + " out of range for " +
                     s.id);
  }
  const Visit& v = s.visits[static_cast<std::size_t>(t - 1)];
  if (!v.features.allFinite() || !std::isfinite(v.score)) {
    throw InputError("anchor_input: subject " + s.id + " is not imputed");
  }
  Eigen::VectorXd u(stats.dim() + 1);
  u.head(stats.dim()) = stats.standardize_features(v.features);
  u[stats.dim()] = stats.standardize_target(v.score);
  return u;
}

TrainingSet build_training_rows(const std::vector<Subject>& subjects,
                                const NormalizationStats& stats, int horizon) {
  if (horizon < 1) {
    throw InputError("build_training_rows: horizon must be >= 1");
  }
  long rows = 0;
  for (const auto& s : subjects) {
    rows += std::max<long>(0, static_cast<long>(s.visits.size()) - horizon);
  }

  TrainingSet ts;
  ts.horizon_count = horizon;
  ts.inputs.resize(rows, stats.dim() + 1);
  ts.targets.resize(rows, horizon);
  ts.provenance.reserve(static_cast<std::size_t>(rows));

  long row = 0;
  for (const auto& s : subjects) {
    const int total = static_cast<int>(s.visits.size());
    for (int t = 1; t + horizon <= total; ++t) {
      ts.inputs.row(row) = anchor_input(s, t, stats).transpose();
      for (int h = 1; h <= horizon; ++h) {
        const Visit& future = s.visits[static_cast<std::size_t>(t + h - 1)];
        if (!std::isfinite(future.score)) {
          throw InputError("build_training_rows: subject " + s.id + " is not imputed");
        }
        ts.targets(row, h - 1) = stats.standardize_target(future.score);
      }
      ts.provenance.push_back(RowProvenance{s.id, t});
      ++row;
    }
  }
  return ts;
}

TargetHistory build_target_history(const Subject& s, int current_visit,
                                   const NormalizationStats& stats, int horizon) {
  if (current_visit < 1 || static_cast<std::size_t>(current_visit) > s.visits.size()) {
    throw InputError("build_target_history: current visit out of range for " + s.id);
  }
  TargetHistory hist;
  hist.subject_id = s.id;
  hist.current_visit = current_visit;

  const long rows = std::max<long>(0, static_cast<long>(current_visit) - horizon);
  hist.inputs.resize(rows, stats.dim() + 1);
  hist.targets.resize(rows, horizon);
  for (long tau = 1; tau <= rows; ++tau) {
    hist.inputs.row(tau - 1) = anchor_input(s, static_cast<int>(tau), stats).transpose();
    for (int h = 1; h <= horizon; ++h) {
      const Visit& future = s.visits[static_cast<std::size_t>(tau + h - 1)];
      hist.targets(tau - 1, h - 1) = stats.standardize_target(future.score);
    }
  }
  return hist;
}

std::vector<Subject> filter_eligible(const std::vector<Subject>& subjects, int min_visits,
                                     double max_missing_fraction) {
  std::vector<Subject> kept;
  for (const auto& s : subjects) {
    if (s.observed_visit_count() >= min_visits &&
        s.feature_missing_fraction() <= max_missing_fraction) {
      kept.push_back(s);
    }
  }
  return kept;
}

}  // namespace gpf
