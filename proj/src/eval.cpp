#include "gpforecast/eval.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "format.hpp"
#include "gpforecast/errors.hpp"
#include "gpforecast/personalize.hpp"

namespace gpf {

namespace {

constexpr double kMaxCiWeight = 1e12;

double sample_mean(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) {
    return 0.0;
  }
  const double m = sample_mean(xs);
  double acc = 0.0;
  for (double x : xs) {
    acc += (x - m) * (x - m);
  }
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

MetricCell cell_from(std::span<const double> fold_values) {
  MetricCell c;
  c.folds = static_cast<int>(fold_values.size());
  if (!fold_values.empty()) {
    c.mean = sample_mean(fold_values);
    c.sd = sample_sd(fold_values);
  }
  return c;
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Sgp:
      return "sgp";
    case ModelKind::Pgp:
      return "pgp";
    case ModelKind::Tgp:
      return "tgp";
    case ModelKind::Joint:
      return "joint";
  }
  throw InputError("unknown model kind");
}

ModelKind model_from_string(const std::string& name) {
  if (name == "sgp") return ModelKind::Sgp;
  if (name == "pgp") return ModelKind::Pgp;
  if (name == "tgp") return ModelKind::Tgp;
  if (name == "joint") return ModelKind::Joint;
  throw ConfigError("unknown model '" + name + "' (expected sgp, pgp, tgp or joint)");
}

std::vector<ModelKind> parse_model_list(const std::string& csv) {
  std::vector<ModelKind> models;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (!token.empty()) {
      const ModelKind kind = model_from_string(token);
      if (std::find(models.begin(), models.end(), kind) == models.end()) {
        models.push_back(kind);
      }
    }
  }
  if (models.empty()) {
    throw ConfigError("empty model list");
  }
  return models;
}

FoldSplit split_folds(const std::vector<std::string>& subject_ids, int k, std::uint64_t seed) {
  if (k <= 1) {
    throw ConfigError("split_folds: need at least 2 folds");
  }
  if (static_cast<std::size_t>(k) > subject_ids.size()) {
    throw ConfigError("split_folds: more folds than subjects");
  }

  // Sort before shuffling so the assignment depends on the ids and the seed,
  // not on the file order.
  std::vector<std::string> ids = subject_ids;
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(ids[i - 1], ids[j]);
  }

  FoldSplit split;
  split.k = k;
  split.seed = seed;
  split.folds.resize(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int fold = static_cast<int>(i % static_cast<std::size_t>(k));
    split.folds[static_cast<std::size_t>(fold)].push_back(ids[i]);
    split.fold_of[ids[i]] = fold;
  }
  return split;
}

std::vector<PredictionRecord> evaluate_subject(const PopulationModel& m, const Subject& s,
                                               const EvalSettings& cfg) {
  const int total = static_cast<int>(s.visits.size());
  std::vector<PredictionRecord> records;
  if (total < 2) {
    return records;
  }

  for (int t = 1; t <= total - 1; ++t) {
    const Eigen::VectorXd u_star = anchor_input(s, t, m.normalizer);
    const TargetHistory hist = build_target_history(s, t, m.normalizer, cfg.horizon);

    // The per-anchor forecasts the requested models are built from. sGP is
    // shared by every fallback path.
    const GaussianForecast sgp = predict_sgp(m, u_star);
    std::optional<GaussianForecast> pgp;
    std::optional<GaussianForecast> tgp;
    for (ModelKind kind : cfg.models) {
      if (kind == ModelKind::Pgp || kind == ModelKind::Joint) {
        if (!pgp.has_value()) {
          pgp = hist.empty() ? sgp : predict_pgp(m, hist, u_star);
        }
      }
      if (kind == ModelKind::Tgp || kind == ModelKind::Joint) {
        if (!tgp.has_value() && !hist.empty()) {
          tgp = predict_tgp(m.hyper, hist, u_star, m.normalizer);
        }
      }
    }

    const auto forecast_for = [&](ModelKind kind) -> const GaussianForecast& {
      switch (kind) {
        case ModelKind::Sgp:
          return sgp;
        case ModelKind::Pgp:
          return *pgp;
        case ModelKind::Tgp:
          return tgp.has_value() ? *tgp : sgp;  // population fallback
        case ModelKind::Joint:
          break;
      }
      throw InputError("unknown model kind");
    };
    std::optional<GaussianForecast> joint;
    if (std::find(cfg.models.begin(), cfg.models.end(), ModelKind::Joint) != cfg.models.end()) {
      joint = predict_joint(*pgp, tgp);
    }

    const int max_h = std::min(cfg.horizon, total - t);
    for (ModelKind kind : cfg.models) {
      const GaussianForecast& f =
          (kind == ModelKind::Joint) ? *joint : forecast_for(kind);
      for (int h = 1; h <= max_h; ++h) {
        const Visit& slot = s.visits[static_cast<std::size_t>(t + h - 1)];
        PredictionRecord rec;
        rec.subject_id = s.id;
        rec.anchor = t;
        rec.horizon = h;
        rec.model = kind;
        rec.mean = f.means[static_cast<std::size_t>(h - 1)];
        if (cfg.clamp_output) {
          rec.mean = std::clamp(rec.mean, 0.0, 85.0);
        }
        rec.variance = f.variance;
        const double half = kCiHalfWidth * std::sqrt(f.variance);
        rec.ci_lower = rec.mean - half;
        rec.ci_upper = rec.mean + half;
        rec.truth = slot.score;
        rec.truth_observed = slot.score_observed;
        records.push_back(std::move(rec));
      }
    }
  }
  return records;
}

double mae(std::span<const PredictionRecord> records) {
  double acc = 0.0;
  long n = 0;
  for (const auto& r : records) {
    if (r.truth_observed) {
      acc += std::abs(r.truth - r.mean);
      ++n;
    }
  }
  if (n == 0) {
    throw MetricError("mae: no records with observed truth");
  }
  return acc / static_cast<double>(n);
}

double wes(std::span<const PredictionRecord> records) {
  std::vector<std::pair<double, double>> weight_error;
  bool warned = false;
  for (const auto& r : records) {
    if (!r.truth_observed) {
      continue;
    }
    // The CI bounds satisfy mean +/- 0.67 sqrt(V) by construction, so the
    // width comes straight from the variance; subtracting the bounds would
    // re-round once per record and break the constant-variance degeneracy.
    const double width = 2.0 * kCiHalfWidth * std::sqrt(r.variance);
    if (width <= 0.0 && !warned) {
      std::cerr << "warning: zero-width confidence interval, capping WES weight at 1e12\n";
      warned = true;
    }
    const double w = width > 0.0 ? std::min(1.0 / width, kMaxCiWeight) : kMaxCiWeight;
    weight_error.emplace_back(w, std::abs(r.truth - r.mean));
  }
  if (weight_error.empty()) {
    throw MetricError("wes: no records with observed truth");
  }

  // Normalizing by the largest weight leaves the ratio untouched but makes
  // the constant-variance case degenerate to the MAE bit for bit.
  double w_max = 0.0;
  for (const auto& [w, err] : weight_error) {
    w_max = std::max(w_max, w);
  }
  double weighted = 0.0;
  double weight_sum = 0.0;
  for (const auto& [w, err] : weight_error) {
    const double scaled = w / w_max;
    weighted += scaled * err;
    weight_sum += scaled;
  }
  return weighted / weight_sum;
}

PairedTTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  PairedTTestResult res;
  if (a.size() != b.size()) {
    throw InputError("paired_ttest: sample sizes differ");
  }
  const std::size_t n = a.size();
  if (n < 2) {
    return res;
  }
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) {
    diff[i] = a[i] - b[i];
  }
  const double mean_diff = sample_mean(diff);
  const double sd_diff = sample_sd(diff);
  res.dof = static_cast<int>(n - 1);
  res.valid = true;
  if (sd_diff == 0.0) {
    res.t_statistic = mean_diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    res.p_value = mean_diff == 0.0 ? 1.0 : 0.0;
    return res;
  }
  res.t_statistic = mean_diff / (sd_diff / std::sqrt(static_cast<double>(n)));
  boost::math::students_t dist(static_cast<double>(res.dof));
  res.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(res.t_statistic)));
  return res;
}

namespace {

// Per-fold metric values for one (model, filter) combination; folds with no
// observed records are skipped.
template <typename Filter>
std::vector<double> fold_metric(const std::vector<PredictionRecord>& records,
                                const FoldSplit& split, ModelKind model, Filter&& keep,
                                double (*metric)(std::span<const PredictionRecord>)) {
  std::vector<std::vector<PredictionRecord>> per_fold(static_cast<std::size_t>(split.k));
  for (const auto& r : records) {
    if (r.model != model || !keep(r)) {
      continue;
    }
    const auto it = split.fold_of.find(r.subject_id);
    if (it == split.fold_of.end()) {
      continue;
    }
    per_fold[static_cast<std::size_t>(it->second)].push_back(r);
  }
  std::vector<double> values;
  for (const auto& fold_records : per_fold) {
    const bool any_observed =
        std::any_of(fold_records.begin(), fold_records.end(),
                    [](const PredictionRecord& r) { return r.truth_observed; });
    if (any_observed) {
      values.push_back(metric(fold_records));
    }
  }
  return values;
}

void mark_significance(const std::vector<ModelKind>& models,
                       const std::map<ModelKind, std::vector<double>>& fold_values,
                       const std::string& column,
                       std::map<std::string, SignificanceMark>& out) {
  // Two best models by fold-mean; star when the paired t-test separates them.
  std::vector<std::pair<double, ModelKind>> ranked;
  for (ModelKind m : models) {
    const auto it = fold_values.find(m);
    if (it != fold_values.end() && !it->second.empty()) {
      ranked.emplace_back(sample_mean(it->second), m);
    }
  }
  if (ranked.size() < 2) {
    return;
  }
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const auto& best = fold_values.at(ranked[0].second);
  const auto& second = fold_values.at(ranked[1].second);
  if (best.size() != second.size() || best.size() < 2) {
    return;
  }
  const PairedTTestResult tt = paired_ttest(best, second);
  SignificanceMark mark;
  mark.best_model = to_string(ranked[0].second);
  mark.runner_up = to_string(ranked[1].second);
  mark.t_statistic = tt.t_statistic;
  mark.p_value = tt.p_value;
  mark.significant = tt.valid && tt.p_value < 0.05;
  out[column] = mark;
}

}  // namespace

MetricReport aggregate(const std::vector<PredictionRecord>& records, const FoldSplit& split,
                       const EvalSettings& cfg, const std::vector<int>& visit_caps) {
  MetricReport report;
  report.horizon = cfg.horizon;
  report.n_folds = split.k;
  report.models = cfg.models;
  report.visit_caps = visit_caps;
  report.n_records = static_cast<long>(records.size());
  report.n_observed =
      std::count_if(records.begin(), records.end(),
                    [](const PredictionRecord& r) { return r.truth_observed; });

  // Collected per column for the significance pass.
  std::map<std::string, std::map<ModelKind, std::vector<double>>> mae_columns;
  std::map<std::string, std::map<ModelKind, std::vector<double>>> wes_columns;

  for (ModelKind model : cfg.models) {
    ModelMetrics metrics;
    std::vector<std::vector<double>> mae_folds_by_h;
    std::vector<std::vector<double>> wes_folds_by_h;
    for (int h = 1; h <= cfg.horizon; ++h) {
      const auto at_horizon = [h](const PredictionRecord& r) { return r.horizon == h; };
      auto mae_vals = fold_metric(records, split, model, at_horizon, &mae);
      auto wes_vals = fold_metric(records, split, model, at_horizon, &wes);
      metrics.mae_by_horizon.push_back(cell_from(mae_vals));
      metrics.wes_by_horizon.push_back(cell_from(wes_vals));
      const std::string column = "t+" + std::to_string(h);
      mae_columns[column][model] = mae_vals;
      wes_columns[column][model] = wes_vals;
      mae_folds_by_h.push_back(std::move(mae_vals));
      wes_folds_by_h.push_back(std::move(wes_vals));
    }

    // The "avg" column averages the per-horizon values fold by fold, so its
    // mean equals the mean of the per-horizon fold means.
    const auto fold_average = [&](const std::vector<std::vector<double>>& by_h) {
      std::vector<double> avg;
      if (by_h.empty()) {
        return avg;
      }
      const std::size_t folds = by_h.front().size();
      for (const auto& v : by_h) {
        if (v.size() != folds) {
          return std::vector<double>{};
        }
      }
      for (std::size_t f = 0; f < folds; ++f) {
        double acc = 0.0;
        for (const auto& v : by_h) {
          acc += v[f];
        }
        avg.push_back(acc / static_cast<double>(by_h.size()));
      }
      return avg;
    };
    auto mae_avg_vals = fold_average(mae_folds_by_h);
    auto wes_avg_vals = fold_average(wes_folds_by_h);
    metrics.mae_avg = cell_from(mae_avg_vals);
    metrics.wes_avg = cell_from(wes_avg_vals);
    mae_columns["avg"][model] = std::move(mae_avg_vals);
    wes_columns["avg"][model] = std::move(wes_avg_vals);

    for (int cap : visit_caps) {
      const auto within_cap = [cap](const PredictionRecord& r) { return r.anchor <= cap; };
      metrics.mae_by_visit_cap[cap] =
          cell_from(fold_metric(records, split, model, within_cap, &mae));
    }
    report.per_model.emplace(model, std::move(metrics));
  }

  for (const auto& [column, values] : mae_columns) {
    mark_significance(cfg.models, values, column, report.significance_mae);
  }
  for (const auto& [column, values] : wes_columns) {
    mark_significance(cfg.models, values, column, report.significance_wes);
  }
  return report;
}

void save_records_csv(const std::vector<PredictionRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ConfigError("cannot open '" + path + "' for writing");
  }
  out << "subject_id,t,h,model,mean,variance,ci_lo,ci_hi,truth,observed\n";
  for (const auto& r : records) {
    out << r.subject_id << ',' << r.anchor << ',' << r.horizon << ',' << to_string(r.model)
        << ',' << detail::format_double(r.mean) << ',' << detail::format_double(r.variance)
        << ',' << detail::format_double(r.ci_lower) << ',' << detail::format_double(r.ci_upper)
        << ',' << detail::format_double(r.truth) << ',' << (r.truth_observed ? 1 : 0) << '\n';
  }
  if (!out) {
    throw ConfigError("failed while writing '" + path + "'");
  }
}

std::vector<PredictionRecord> load_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open record file '" + path + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("record file is empty", 1);
  }

  std::vector<PredictionRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) {
      cells.push_back(cell);
    }
    if (cells.size() != 10) {
      throw ParseError("expected 10 cells in record row", line_no);
    }
    try {
      PredictionRecord r;
      r.subject_id = cells[0];
      r.anchor = std::stoi(cells[1]);
      r.horizon = std::stoi(cells[2]);
      r.model = model_from_string(cells[3]);
      r.mean = std::stod(cells[4]);
      r.variance = std::stod(cells[5]);
      r.ci_lower = std::stod(cells[6]);
      r.ci_upper = std::stod(cells[7]);
      r.truth = cells[8].empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(cells[8]);
      r.truth_observed = cells[9] == "1";
      records.push_back(std::move(r));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError("cannot parse record row", line_no);
    }
  }
  return records;
}

}  // namespace gpf
