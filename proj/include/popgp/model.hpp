#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "popgp/errors.hpp"
#include "popgp/kernel.hpp"

namespace popgp {

// Per-slot request counts, one row per content.
struct RequestHistory {
  Eigen::MatrixXi counts;  // M x N

  int content_count() const { return static_cast<int>(counts.rows()); }
  int slot_count() const { return static_cast<int>(counts.cols()); }

  void validate() const {
    if (counts.rows() < 1 || counts.cols() < 1)
      throw InvalidInputError("RequestHistory: need at least one content and one slot");
    if ((counts.array() < 0).any())
      throw InvalidInputError("RequestHistory: counts must be nonnegative");
  }
};

// Cached per-content request totals; all the likelihood needs besides N.
struct SufficientStats {
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> total_requests;
  int slot_count = 0;

  int content_count() const { return static_cast<int>(total_requests.size()); }

  static SufficientStats from_history(const RequestHistory& history) {
    history.validate();
    SufficientStats stats;
    stats.slot_count = history.slot_count();
    stats.total_requests = history.counts.cast<std::int64_t>().rowwise().sum();
    return stats;
  }
};

// Gamma(shape A_q, rate B_q) hyperpriors on the kernel parameters.
struct GammaHyperPriors {
  Vec shape;
  Vec rate;

  static GammaHyperPriors constant(int count, double a = 1.0, double b = 1.0) {
    return {Vec::Constant(count, a), Vec::Constant(count, b)};
  }

  void validate(int expected) const {
    if (shape.size() != expected || rate.size() != expected)
      throw InvalidInputError("GammaHyperPriors: need exactly " + std::to_string(expected) +
                              " shape/rate entries");
    if ((shape.array() <= 0.0).any() || (rate.array() <= 0.0).any())
      throw InvalidInputError("GammaHyperPriors: shapes and rates must be positive");
  }
};

// Sampler state zeta = (lambda, phi): lambda are per-content log-rates,
// phi = log(theta) the unconstrained kernel hyperparameters.
struct LatentState {
  Vec lambda;
  Vec phi;

  int content_count() const { return static_cast<int>(lambda.size()); }
  int hyper_count() const { return static_cast<int>(phi.size()); }
  int dim() const { return content_count() + hyper_count(); }

  Vec theta() const { return phi.array().exp(); }
  KernelParams kernel_params() const { return KernelParams{theta()}; }

  Vec flatten() const {
    Vec flat(dim());
    flat.head(lambda.size()) = lambda;
    flat.tail(phi.size()) = phi;
    return flat;
  }

  static LatentState unflatten(const Vec& flat, int content_count) {
    if (flat.size() <= content_count)
      throw InvalidInputError("LatentState: flat vector too short for content count");
    LatentState state;
    state.lambda = flat.head(content_count);
    state.phi = flat.tail(flat.size() - content_count);
    return state;
  }

  bool all_finite() const { return lambda.allFinite() && phi.allFinite(); }
};

namespace detail {

// exp with an overflow guard; a diverged trajectory should be rejected
// upstream, not turn into infinities.
inline double guarded_exp(double x, const char* what, int index) {
  if (x > 700.0)
    throw NumericalError(std::string("exp overflow in ") + what + " at component " +
                         std::to_string(index));
  return std::exp(x);
}

}  // namespace detail

// Joint negative log of the unnormalized posterior over zeta = (lambda, phi)
// and its analytic gradient. Additive constants independent of zeta are
// omitted throughout; value and gradient share one covariance factorization
// per phi value.
//
// value:
//   sum_m [ -t_m lambda_m + N e^{lambda_m} ]
//   + 1/2 log det Ktilde + 1/2 lambda^T Ktilde^{-1} lambda
//   + sum_q [ -A_q phi_q + B_q e^{phi_q} ]
// gradient:
//   d/d lambda_m = -t_m + N e^{lambda_m} + [Ktilde^{-1} lambda]_m
//   d/d phi_q    = 1/2 tr(Ktilde^{-1} dKtilde/dphi_q)
//                  - 1/2 lambda^T Ktilde^{-1} (dKtilde/dphi_q) Ktilde^{-1} lambda
//                  - A_q + B_q e^{phi_q}
//
// One evaluation context per chain; the phi cache is not thread-safe.
class PosteriorModel {
 public:
  PosteriorModel(Catalog catalog, SufficientStats stats, GammaHyperPriors priors)
      : catalog_(std::move(catalog)),
        stats_(std::move(stats)),
        priors_(std::move(priors)),
        distances_(catalog_) {
    if (stats_.content_count() != static_cast<int>(catalog_.size()))
      throw InvalidInputError("PosteriorModel: stats and catalog disagree on content count");
    priors_.validate(distances_.feature_dim() + 2);
    totals_ = stats_.total_requests.cast<double>();
  }

  int content_count() const { return static_cast<int>(catalog_.size()); }
  int hyper_count() const { return distances_.feature_dim() + 2; }
  int dim() const { return content_count() + hyper_count(); }
  const Catalog& catalog() const { return catalog_; }
  const SufficientStats& stats() const { return stats_; }
  const GammaHyperPriors& priors() const { return priors_; }

  double value(const LatentState& state) const {
    check_state(state);
    const Cache& cache = refresh(state.phi);
    const double n = static_cast<double>(stats_.slot_count);

    double data_term = 0.0;
    for (int m = 0; m < content_count(); ++m)
      data_term += -totals_[m] * state.lambda[m] +
                   n * detail::guarded_exp(state.lambda[m], "lambda", m);

    const Vec alpha = cache.factor->solve(state.lambda);
    const double gp_term = 0.5 * cache.factor->log_det() + 0.5 * state.lambda.dot(alpha);

    double prior_term = 0.0;
    for (int q = 0; q < hyper_count(); ++q)
      prior_term += -priors_.shape[q] * state.phi[q] +
                    priors_.rate[q] * detail::guarded_exp(state.phi[q], "phi", q);

    return data_term + gp_term + prior_term;
  }

  Vec gradient(const LatentState& state) const {
    check_state(state);
    const Cache& cache = refresh(state.phi);
    const double n = static_cast<double>(stats_.slot_count);
    const int m_count = content_count();
    const int q_count = hyper_count();

    Vec grad(dim());
    const Vec alpha = cache.factor->solve(state.lambda);
    for (int m = 0; m < m_count; ++m)
      grad[m] = -totals_[m] + n * detail::guarded_exp(state.lambda[m], "lambda", m) + alpha[m];

    ensure_inverse();
    const Vec theta = state.theta();
    const KernelParams params{theta};
    for (int q = 0; q < q_count; ++q) {
      double trace_term;
      double quad_term;
      if (q == 0) {
        trace_term = theta[0] * cache.kinv.trace();
        quad_term = theta[0] * alpha.squaredNorm();
      } else if (q == 1) {
        trace_term = cache.kinv.cwiseProduct(cache.k).sum();
        quad_term = alpha.dot(cache.k * alpha);
      } else {
        const Mat& dist = distances_.dim(q - 2);
        const Mat weighted = dist.cwiseProduct(cache.k);
        trace_term = -theta[q] * cache.kinv.cwiseProduct(weighted).sum();
        quad_term = -theta[q] * alpha.dot(weighted * alpha);
      }
      grad[m_count + q] = 0.5 * trace_term - 0.5 * quad_term - priors_.shape[q] +
                          priors_.rate[q] * detail::guarded_exp(state.phi[q], "phi", q);
    }
    return grad;
  }

  double value_flat(const Vec& zeta) const {
    return value(LatentState::unflatten(zeta, content_count()));
  }
  Vec gradient_flat(const Vec& zeta) const {
    return gradient(LatentState::unflatten(zeta, content_count()));
  }

  // Jitter applied by the most recent factorization (diagnostic).
  double last_jitter() const { return cache_.factor ? cache_.factor->jitter_applied() : 0.0; }

 private:
  struct Cache {
    Vec phi;
    Mat k;  // noise-free kernel matrix
    std::optional<CholeskyFactor> factor;
    Mat kinv;
    bool has_kinv = false;
  };

  void check_state(const LatentState& state) const {
    if (state.content_count() != content_count() || state.hyper_count() != hyper_count())
      throw InvalidInputError("PosteriorModel: state dimensions do not match model");
    if (!state.all_finite())
      throw NumericalError("PosteriorModel: state has non-finite entries");
  }

  const Cache& refresh(const Vec& phi) const {
    if (cache_.factor && cache_.phi.size() == phi.size() &&
        (cache_.phi.array() == phi.array()).all()) {
      return cache_;
    }
    Vec theta(phi.size());
    for (int q = 0; q < phi.size(); ++q)
      theta[q] = detail::guarded_exp(phi[q], "phi", q);
    const KernelParams params{theta};
    cache_.phi = phi;
    cache_.k = distances_.noise_free(params);
    Mat ktilde = cache_.k;
    ktilde.diagonal().array() += params.noise();
    cache_.factor.emplace(ktilde);
    cache_.has_kinv = false;
    return cache_;
  }

  void ensure_inverse() const {
    if (!cache_.has_kinv) {
      cache_.kinv = cache_.factor->inverse();
      cache_.has_kinv = true;
    }
  }

  Catalog catalog_;
  SufficientStats stats_;
  GammaHyperPriors priors_;
  SquaredDistances distances_;
  Vec totals_;
  mutable Cache cache_;
};

// Free-function forms of the posterior value and gradient. These rebuild the
// distance table per call; hot loops should hold a PosteriorModel instead.
inline double neg_log_posterior(const LatentState& state, const SufficientStats& stats,
                                const Catalog& catalog, const GammaHyperPriors& priors) {
  return PosteriorModel(catalog, stats, priors).value(state);
}

inline Vec grad_neg_log_posterior(const LatentState& state, const SufficientStats& stats,
                                  const Catalog& catalog, const GammaHyperPriors& priors) {
  return PosteriorModel(catalog, stats, priors).gradient(state);
}

}  // namespace popgp
