#pragma once

#include <cstdint>

#include "gpforecast/cohort.hpp"

namespace gpf {

// Desk-scale stand-in for a real longitudinal cohort. Each subject gets a
// latent baseline and progression rate; scores follow a clamped linear trend
// with AR(1) noise, and a configurable fraction of the features are noisy
// linear readouts of the latents while the rest are pure noise.
struct SyntheticConfig {
  int n_subjects = 100;
  int n_visits = 12;
  int n_features = 20;
  double informative_fraction = 0.5;
  double missing_rate = 0.0;
  std::uint64_t seed = 0;

  // Latent trajectory shape.
  double baseline_mean = 22.0;
  double baseline_sd = 8.0;
  double rate_mean = 0.9;
  double rate_sd = 1.2;
  double ar_coefficient = 0.5;
  double ar_noise_sd = 1.5;
  double feature_noise_sd = 0.3;
  // Informative features read the baseline at unit coefficient scale and the
  // progression rate at this (smaller) scale, so a subject's slope is only
  // partially recoverable from its covariates.
  double rate_readout_scale = 0.3;
  // Static per-(subject, feature) readout offset. This is the covariate-shift
  // knob: a subject with large offsets looks unlike the source subjects that
  // share its trajectory, which is precisely where a population model misfires
  // and the target-only model is unaffected.
  double feature_offset_sd = 0.8;
};

Cohort generate_synthetic(const SyntheticConfig& cfg);

}  // namespace gpf
