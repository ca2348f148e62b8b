#pragma once

#include <cmath>
#include <utility>

#include "popgp/model.hpp"
#include "popgp/sampler.hpp"

namespace popgp {

// Chain initialization: lambda at the smoothed per-content MLE,
// log((t_m + 0.5)/N), finite even for all-zero rows; phi at zero (theta = 1).
inline LatentState initial_state(const SufficientStats& stats, int feature_dim) {
  LatentState state;
  state.lambda.resize(stats.content_count());
  const double n = static_cast<double>(stats.slot_count);
  for (int m = 0; m < stats.content_count(); ++m)
    state.lambda[m] =
        std::log((static_cast<double>(stats.total_requests[m]) + 0.5) / n);
  state.phi = Vec::Zero(feature_dim + 2);
  return state;
}

// Wires the posterior model to the HMC sampler and returns a typed chain.
inline PosteriorChain fit_posterior(const Catalog& catalog, const SufficientStats& stats,
                                    const GammaHyperPriors& priors, const HmcConfig& config) {
  config.validate();
  PosteriorModel model(catalog, stats, priors);
  const LatentState init = initial_state(stats, model.hyper_count() - 2);

  SampleChain raw = run_chain(
      init.flatten(), config, [&](const Vec& z) { return model.value_flat(z); },
      [&](const Vec& z) { return model.gradient_flat(z); });

  PosteriorChain chain;
  chain.samples.reserve(raw.samples.size());
  for (const Vec& flat : raw.samples)
    chain.samples.push_back(LatentState::unflatten(flat, model.content_count()));
  chain.accepted = std::move(raw.accepted);
  chain.hamiltonian_trace = std::move(raw.hamiltonian_trace);
  chain.content_count = model.content_count();
  chain.feature_dim = model.hyper_count() - 2;
  chain.divergences = raw.divergences;
  chain.config = config;
  return chain;
}

inline PosteriorChain fit_posterior(const Catalog& catalog, const RequestHistory& history,
                                    const GammaHyperPriors& priors, const HmcConfig& config) {
  return fit_posterior(catalog, SufficientStats::from_history(history), priors, config);
}

}  // namespace popgp
