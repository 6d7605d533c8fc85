#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "istf/error.hpp"

namespace istf {

// All metrics operate in unscaled (original demand) space. `mask` entries of
// zero drop the corresponding pair; an empty mask keeps everything.

inline double wmape(const std::vector<double>& actuals, const std::vector<double>& forecasts,
                    const std::vector<uint8_t>& mask = {}) {
  if (actuals.size() != forecasts.size() || (!mask.empty() && mask.size() != actuals.size()))
    throw ShapeError("wmape: input length mismatch");
  double num = 0.0, den = 0.0;
  long n = 0;
  for (size_t i = 0; i < actuals.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    num += std::abs(actuals[i] - forecasts[i]);
    den += std::abs(actuals[i]);
    ++n;
  }
  if (n == 0) throw MetricError("wmape: no observed entries");
  if (den == 0.0) throw MetricError("wmape: undefined, sum of |actuals| is zero");
  return num / den;
}

inline double rmse(const std::vector<double>& actuals, const std::vector<double>& forecasts,
                   const std::vector<uint8_t>& mask = {}) {
  if (actuals.size() != forecasts.size() || (!mask.empty() && mask.size() != actuals.size()))
    throw ShapeError("rmse: input length mismatch");
  double sum = 0.0;
  long n = 0;
  for (size_t i = 0; i < actuals.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    double d = actuals[i] - forecasts[i];
    sum += d * d;
    ++n;
  }
  if (n == 0) throw MetricError("rmse: no observed entries");
  return std::sqrt(sum / static_cast<double>(n));
}

// Per-series RMSSE: forecast error scaled by the in-sample one-step naive
// error of the history. Constant history makes the metric undefined.
inline double rmsse(const std::vector<double>& history, const std::vector<double>& actuals,
                    const std::vector<double>& forecasts, const std::vector<uint8_t>& mask = {}) {
  if (history.size() < 2) throw MetricError("rmsse: history needs at least 2 observations");
  if (actuals.size() != forecasts.size() || (!mask.empty() && mask.size() != actuals.size()))
    throw ShapeError("rmsse: input length mismatch");
  double denom = 0.0;
  for (size_t t = 1; t < history.size(); ++t) {
    double d = history[t] - history[t - 1];
    denom += d * d;
  }
  denom /= static_cast<double>(history.size() - 1);
  if (denom == 0.0) throw MetricError("rmsse: constant history, scale is zero");
  double num = 0.0;
  long n = 0;
  for (size_t i = 0; i < actuals.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    double d = actuals[i] - forecasts[i];
    num += d * d;
    ++n;
  }
  if (n == 0) throw MetricError("rmsse: no observed entries");
  return std::sqrt(num / static_cast<double>(n) / denom);
}

// Volume-weighted absolute difference of per-series mean actual vs mean
// forecast, normalized by total volume.
inline double wbias(const std::vector<double>& actual_means, const std::vector<double>& forecast_means,
                    const std::vector<double>& volumes) {
  if (actual_means.size() != forecast_means.size() || actual_means.size() != volumes.size())
    throw ShapeError("wbias: input length mismatch");
  double num = 0.0, den = 0.0;
  for (size_t s = 0; s < volumes.size(); ++s) {
    num += volumes[s] * std::abs(actual_means[s] - forecast_means[s]);
    den += volumes[s];
  }
  if (den == 0.0) throw MetricError("wbias: total volume is zero");
  return num / den;
}

}  // namespace istf
