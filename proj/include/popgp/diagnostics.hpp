#pragma once

#include <cmath>
#include <vector>

#include "popgp/errors.hpp"

namespace popgp {

// Effective sample size via the initial positive sequence estimator: sum
// autocorrelations over lag pairs while the pair sums stay positive.
inline double effective_sample_size(const std::vector<double>& series) {
  const std::size_t n = series.size();
  if (n < 4) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);

  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t)
      acc += (series[t] - mean) * (series[t + lag] - mean);
    return acc / static_cast<double>(n);
  };

  const double var = autocov(0);
  if (var <= 0.0) return static_cast<double>(n);
  double tau = 1.0;
  for (std::size_t lag = 1; lag + 1 < n; lag += 2) {
    const double pair = autocov(lag) + autocov(lag + 1);
    if (pair <= 0.0) break;
    tau += 2.0 * pair / var;
  }
  return static_cast<double>(n) / tau;
}

// Standard error of the mean of a correlated series, batch-means estimate.
inline double batch_means_se(const std::vector<double>& series, int batch_count = 25) {
  if (batch_count < 2) throw InvalidInputError("batch_means_se: need at least 2 batches");
  const std::size_t n = series.size();
  if (n < static_cast<std::size_t>(2 * batch_count))
    throw InvalidInputError("batch_means_se: series too short for the batch count");
  const std::size_t batch_len = n / static_cast<std::size_t>(batch_count);

  std::vector<double> batch_means(batch_count, 0.0);
  for (int b = 0; b < batch_count; ++b) {
    double acc = 0.0;
    for (std::size_t t = 0; t < batch_len; ++t) acc += series[b * batch_len + t];
    batch_means[b] = acc / static_cast<double>(batch_len);
  }
  double grand = 0.0;
  for (double v : batch_means) grand += v;
  grand /= batch_count;
  double ss = 0.0;
  for (double v : batch_means) ss += (v - grand) * (v - grand);
  const double var_of_mean = ss / (batch_count * (batch_count - 1.0));
  return std::sqrt(var_of_mean);
}

}  // namespace popgp
