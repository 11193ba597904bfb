#include "gpforecast/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "gpforecast/errors.hpp"

namespace gpf {

namespace {

std::string subject_name(int index) {
  std::ostringstream oss;
  oss << 'S';
  oss.width(4);
  oss.fill('0');
  oss << (index + 1);
  return oss.str();
}

}  // namespace

Cohort generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n_subjects < 1 || cfg.n_visits < 2 || cfg.n_features < 1) {
    throw ConfigError("generate_synthetic: need at least 1 subject, 2 visits and 1 feature");
  }
  if (cfg.missing_rate < 0.0 || cfg.missing_rate > 1.0) {
    throw ConfigError("generate_synthetic: missing_rate must lie in [0,1]");
  }
  if (cfg.informative_fraction < 0.0 || cfg.informative_fraction > 1.0) {
    throw ConfigError("generate_synthetic: informative_fraction must lie in [0,1]");
  }
  if (cfg.baseline_sd <= 0.0 || cfg.rate_sd <= 0.0) {
    throw ConfigError("generate_synthetic: latent standard deviations must be positive");
  }

  const int n_informative =
      static_cast<int>(std::lround(cfg.informative_fraction * cfg.n_features));

  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(cfg.n_features));
  for (int j = 0; j < cfg.n_features; ++j) {
    std::ostringstream oss;
    oss << 'f';
    oss.width(3);
    oss.fill('0');
    oss << (j + 1);
    names.push_back(oss.str());
  }

  Cohort cohort;
  cohort.schema = FeatureSchema::with_names(std::move(names));

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit_uniform(0.0, 1.0);

  // Per-feature readout coefficients for the informative block.
  std::vector<double> coeff_baseline(static_cast<std::size_t>(n_informative));
  std::vector<double> coeff_rate(static_cast<std::size_t>(n_informative));
  for (int j = 0; j < n_informative; ++j) {
    coeff_baseline[static_cast<std::size_t>(j)] = unit_normal(rng);
    coeff_rate[static_cast<std::size_t>(j)] = cfg.rate_readout_scale * unit_normal(rng);
  }

  cohort.subjects.reserve(static_cast<std::size_t>(cfg.n_subjects));
  for (int i = 0; i < cfg.n_subjects; ++i) {
    Subject subject;
    subject.id = subject_name(i);

    const double baseline = cfg.baseline_mean + cfg.baseline_sd * unit_normal(rng);
    const double rate = cfg.rate_mean + cfg.rate_sd * unit_normal(rng);
    const double baseline_std = (baseline - cfg.baseline_mean) / cfg.baseline_sd;
    const double rate_std = (rate - cfg.rate_mean) / cfg.rate_sd;

    std::vector<double> feature_offset(static_cast<std::size_t>(n_informative));
    for (int j = 0; j < n_informative; ++j) {
      feature_offset[static_cast<std::size_t>(j)] = cfg.feature_offset_sd * unit_normal(rng);
    }

    double ar_state = 0.0;
    for (int v = 0; v < cfg.n_visits; ++v) {
      ar_state = cfg.ar_coefficient * ar_state + cfg.ar_noise_sd * unit_normal(rng);

      Visit visit;
      visit.observed = true;
      visit.month = 6 * v;
      visit.score = std::clamp(baseline + rate * v + ar_state, 0.0, 85.0);
      visit.score_observed = true;

      visit.features.resize(cfg.n_features);
      visit.feature_observed.assign(static_cast<std::size_t>(cfg.n_features), true);
      for (int j = 0; j < cfg.n_features; ++j) {
        if (j < n_informative) {
          visit.features[j] = coeff_baseline[static_cast<std::size_t>(j)] * baseline_std +
                              coeff_rate[static_cast<std::size_t>(j)] * rate_std +
                              feature_offset[static_cast<std::size_t>(j)] +
                              cfg.feature_noise_sd * unit_normal(rng);
        } else {
          visit.features[j] = unit_normal(rng);
        }
      }

      for (int j = 0; j < cfg.n_features; ++j) {
        if (unit_uniform(rng) < cfg.missing_rate) {
          visit.features[j] = std::numeric_limits<double>::quiet_NaN();
          visit.feature_observed[static_cast<std::size_t>(j)] = false;
        }
      }
      // The baseline score is always assessed. Dropping it would make the
      // leading-gap backfill feed a future score into the first anchors.
      if (unit_uniform(rng) < cfg.missing_rate && v != 0) {
        visit.score = std::numeric_limits<double>::quiet_NaN();
        visit.score_observed = false;
      }

      subject.visits.push_back(std::move(visit));
    }

    // LOCF needs at least one observed score per subject.
    bool any_score = false;
    for (const auto& v : subject.visits) {
      any_score = any_score || v.score_observed;
    }
    if (!any_score) {
      Visit& first = subject.visits.front();
      first.score = std::clamp(baseline, 0.0, 85.0);
      first.score_observed = true;
    }

    cohort.subjects.push_back(std::move(subject));
  }
  return cohort;
}

}  // namespace gpf
