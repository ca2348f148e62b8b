#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "popgp/errors.hpp"
#include "popgp/kernel.hpp"
#include "popgp/rng.hpp"
#include "popgp/sampler.hpp"

namespace popgp {

// Posterior-predictive summary for the modeled contents.
struct RatePrediction {
  Vec mean_rate;   // Monte Carlo estimate of E[e^{lambda_m} | data]
  Vec quantile05;  // empirical quantiles of the sampled rates
  Vec quantile50;
  Vec quantile95;
  int sample_count = 0;
};

namespace detail {

// Type-7 (linear interpolation) empirical quantile of a sorted series.
inline double sorted_quantile(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

// Mean and 5/50/95% quantiles of the per-content rate samples e^{lambda_m,s}.
inline RatePrediction predict_existing(const PosteriorChain& chain) {
  if (chain.samples.empty()) throw InvalidInputError("predict_existing: chain has no samples");
  const int m_count = chain.content_count;
  const int s_count = chain.sample_count();

  RatePrediction out;
  out.mean_rate = Vec::Zero(m_count);
  out.quantile05.resize(m_count);
  out.quantile50.resize(m_count);
  out.quantile95.resize(m_count);
  out.sample_count = s_count;

  std::vector<double> rates(s_count);
  for (int m = 0; m < m_count; ++m) {
    double acc = 0.0;
    for (int s = 0; s < s_count; ++s) {
      rates[s] = std::exp(chain.samples[s].lambda[m]);
      acc += rates[s];
    }
    out.mean_rate[m] = acc / static_cast<double>(s_count);
    std::sort(rates.begin(), rates.end());
    out.quantile05[m] = detail::sorted_quantile(rates, 0.05);
    out.quantile50[m] = detail::sorted_quantile(rates, 0.50);
    out.quantile95[m] = detail::sorted_quantile(rates, 0.95);
  }
  return out;
}

// Posterior-predictive request draws: each column picks a posterior sample
// uniformly, then draws one Poisson count per content at that sample's rates.
inline Eigen::MatrixXi sample_future_requests(const PosteriorChain& chain, Rng& rng, int draws) {
  if (chain.samples.empty())
    throw InvalidInputError("sample_future_requests: chain has no samples");
  if (draws < 1) throw InvalidInputError("sample_future_requests: draws must be >= 1");
  const int m_count = chain.content_count;
  Eigen::MatrixXi out(m_count, draws);
  for (int j = 0; j < draws; ++j) {
    const std::size_t s = rng.uniform_index(chain.samples.size());
    const LatentState& state = chain.samples[s];
    for (int m = 0; m < m_count; ++m)
      out(m, j) = static_cast<int>(rng.poisson(std::exp(state.lambda[m])));
  }
  return out;
}

struct ConditionalGaussian {
  double mean = 0.0;
  double variance = 0.0;
  bool variance_clamped = false;  // negative-by-roundoff variance clamped to 0
};

// GP conditioning of a new content's natural parameter on one posterior state:
//   mean     = ktilde_vec^T Ktilde^{-1} lambda
//   variance = k(x_new, x_new) + theta_0 - ktilde_vec^T Ktilde^{-1} ktilde_vec
// where ktilde_vec_m = k(x_m, x_new) is noise-free.
inline ConditionalGaussian conditional_lambda_params(const FeatureVector& x_new,
                                                     const LatentState& state,
                                                     const Catalog& catalog) {
  const KernelParams params = state.kernel_params();
  if (x_new.size() != params.feature_dim())
    throw InvalidInputError("conditional_lambda_params: x_new dimension mismatch");
  if (static_cast<Eigen::Index>(catalog.size()) != state.lambda.size())
    throw InvalidInputError("conditional_lambda_params: catalog and state disagree on M");
  const int m_count = static_cast<int>(catalog.size());

  Vec cross(m_count);
  for (int m = 0; m < m_count; ++m) cross[m] = sek(catalog[m], x_new, params);

  CovarianceMatrix ktilde = build_ktilde(catalog, params);
  CholeskyFactor factor(ktilde.entries);

  ConditionalGaussian out;
  out.mean = cross.dot(factor.solve(state.lambda));
  const double prior_var = params.vertical() + params.noise();
  out.variance = prior_var - cross.dot(factor.solve(cross));
  if (out.variance < 0.0) {
    out.variance = 0.0;
    out.variance_clamped = true;
  }
  return out;
}

// Point rate for an unseen content, the chain average of the exponentiated
// conditional mean: (1/S) sum_s exp(ktilde_s^T Ktilde_s^{-1} lambda_s). The
// exponential is applied to the conditional mean only; the per-sample
// conditional variances are kept so a lognormal-corrected estimate
// (multiplying each term by e^{variance/2}) can be formed downstream.
struct NewContentPrediction {
  double mean_rate = 0.0;
  std::vector<double> lambda_conditional_mean_samples;
  std::vector<double> lambda_conditional_var_samples;
  int clamped_count = 0;  // variance samples clamped at zero
  int skipped_count = 0;  // samples dropped due to factorization failure
};

inline NewContentPrediction predict_new_content(const PosteriorChain& chain,
                                                const FeatureVector& x_new,
                                                const Catalog& catalog) {
  if (chain.samples.empty())
    throw InvalidInputError("predict_new_content: chain has no samples");
  if (static_cast<int>(catalog.size()) != chain.content_count)
    throw InvalidInputError("predict_new_content: catalog and chain disagree on M");

  // Cross squared distances to the catalog are sample-independent.
  const int m_count = static_cast<int>(catalog.size());
  const int q_dim = static_cast<int>(x_new.size());
  SquaredDistances distances(catalog);
  if (distances.feature_dim() != q_dim)
    throw InvalidInputError("predict_new_content: x_new dimension mismatch");
  Mat cross_sq(m_count, q_dim);
  for (int m = 0; m < m_count; ++m)
    for (int d = 0; d < q_dim; ++d) {
      const double diff = catalog[m][d] - x_new[d];
      cross_sq(m, d) = diff * diff;
    }

  NewContentPrediction out;
  out.lambda_conditional_mean_samples.reserve(chain.samples.size());
  out.lambda_conditional_var_samples.reserve(chain.samples.size());

  double acc = 0.0;
  for (const LatentState& state : chain.samples) {
    const KernelParams params = state.kernel_params();
    const Vec cross =
        (params.vertical() * (-(cross_sq * params.theta.tail(q_dim)).array()).exp()).matrix();
    Mat ktilde = distances.noise_free(params);
    ktilde.diagonal().array() += params.noise();
    try {
      CholeskyFactor factor(ktilde);
      const double mean = cross.dot(factor.solve(state.lambda));
      double variance =
          params.vertical() + params.noise() - cross.dot(factor.solve(cross));
      if (variance < 0.0) {
        variance = 0.0;
        ++out.clamped_count;
      }
      out.lambda_conditional_mean_samples.push_back(mean);
      out.lambda_conditional_var_samples.push_back(variance);
      acc += std::exp(mean);
    } catch (const NumericalError&) {
      ++out.skipped_count;
    }
  }

  const std::size_t used = out.lambda_conditional_mean_samples.size();
  if (out.skipped_count > 0 &&
      static_cast<double>(out.skipped_count) > 0.01 * static_cast<double>(chain.samples.size()))
    throw NumericalError("predict_new_content: more than 1% of samples failed to factorize (" +
                         std::to_string(out.skipped_count) + " of " +
                         std::to_string(chain.samples.size()) + ")");
  out.mean_rate = acc / static_cast<double>(used);
  return out;
}

}  // namespace popgp
