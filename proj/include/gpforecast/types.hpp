#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "gpforecast/errors.hpp"

namespace gpf {

// RBF kernel hyperparameters. Values live in natural units; the log accessors
// exist because optimization runs unconstrained in log space.
class Hyperparameters {
public:
  Hyperparameters(double signal_variance, double lengthscale, double noise_variance)
      : log_signal_(std::log(check_positive(signal_variance, "signal_variance"))),
        log_length_(std::log(check_positive(lengthscale, "lengthscale"))),
        log_noise_(std::log(check_positive(noise_variance, "noise_variance"))) {}

  static Hyperparameters from_log(double log_signal_variance, double log_lengthscale,
                                  double log_noise_variance) {
    Hyperparameters h;
    h.log_signal_ = log_signal_variance;
    h.log_length_ = log_lengthscale;
    h.log_noise_ = log_noise_variance;
    return h;
  }

  double signal_variance() const { return std::exp(log_signal_); }
  double lengthscale() const { return std::exp(log_length_); }
  double noise_variance() const { return std::exp(log_noise_); }

  double log_signal_variance() const { return log_signal_; }
  double log_lengthscale() const { return log_length_; }
  double log_noise_variance() const { return log_noise_; }

private:
  Hyperparameters() = default;

  static double check_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InputError(std::string(name) + " must be strictly positive and finite");
    }
    return v;
  }

  double log_signal_ = 0.0;
  double log_length_ = 0.0;
  double log_noise_ = 0.0;
};

// Predictive distribution over the H forecast horizons, in raw score units.
// The variance is a single scalar shared by all horizons: the kernel ties the
// horizons to one covariance, so they all receive the same predictive spread.
struct GaussianForecast {
  std::vector<double> means;        // one per horizon, 0-85 scale, not clamped
  double variance = 0.0;            // shared across horizons, raw squared units
  std::vector<int> horizon_months;  // 6*h for h = 1..H

  std::size_t horizons() const { return means.size(); }
};

inline GaussianForecast make_forecast(std::vector<double> means, double variance) {
  GaussianForecast f;
  f.means = std::move(means);
  f.variance = variance;
  f.horizon_months.reserve(f.means.size());
  for (std::size_t h = 1; h <= f.means.size(); ++h) {
    f.horizon_months.push_back(static_cast<int>(6 * h));
  }
  return f;
}

}  // namespace gpf
