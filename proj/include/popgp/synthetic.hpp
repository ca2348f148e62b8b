#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "popgp/errors.hpp"
#include "popgp/kernel.hpp"
#include "popgp/model.hpp"
#include "popgp/rng.hpp"

namespace popgp {

// Feature distribution: leading binary dimensions with given Bernoulli
// probabilities, then standard-normal continuous dimensions. Defaults match
// the synthetic experiments (Q = 4).
struct FeatureModel {
  std::vector<double> bernoulli_probs{0.5, 0.8, 0.2};
  int normal_dims = 1;

  int feature_dim() const { return static_cast<int>(bernoulli_probs.size()) + normal_dims; }

  void validate() const {
    if (feature_dim() < 1) throw InvalidInputError("FeatureModel: need at least one dimension");
    if (normal_dims < 0) throw InvalidInputError("FeatureModel: normal_dims must be >= 0");
    for (double p : bernoulli_probs)
      if (!(p >= 0.0 && p <= 1.0))
        throw InvalidInputError("FeatureModel: Bernoulli probabilities must lie in [0, 1]");
  }
};

inline Catalog gen_features(int m_contents, std::uint64_t seed,
                            const FeatureModel& model = FeatureModel{}) {
  if (m_contents < 1) throw InvalidInputError("gen_features: m_contents must be >= 1");
  model.validate();
  Rng rng(seed);
  Catalog catalog;
  catalog.reserve(m_contents);
  for (int m = 0; m < m_contents; ++m) {
    FeatureVector x(model.feature_dim());
    int d = 0;
    for (double p : model.bernoulli_probs) x[d++] = rng.uniform() < p ? 1.0 : 0.0;
    for (int k = 0; k < model.normal_dims; ++k) x[d++] = rng.normal();
    catalog.push_back(std::move(x));
  }
  return catalog;
}

// A ground-truth instance: catalog, the generating kernel parameters, and
// one latent popularity draw lambda ~ N(0, Ktilde(true_params)).
struct SyntheticScenario {
  Catalog catalog;
  KernelParams true_params;
  Vec true_lambda;
  Vec true_rates;  // exp(true_lambda), entry by entry
  std::uint64_t rng_seed = 0;

  int content_count() const { return static_cast<int>(catalog.size()); }
};

inline SyntheticScenario gen_ground_truth(Catalog catalog, const KernelParams& true_params,
                                          std::uint64_t seed) {
  true_params.validate();
  validate_catalog(catalog, true_params.feature_dim());

  CovarianceMatrix ktilde = build_ktilde(catalog, true_params);
  CholeskyFactor factor(ktilde.entries);

  Rng rng(seed);
  Vec z(static_cast<int>(catalog.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();

  SyntheticScenario scenario;
  scenario.true_lambda = factor.lower() * z;
  // Scalar std::exp per entry: Eigen's vectorized exp can differ by an ulp
  // across architectures, and rate = e^{lambda} must replay bit-identically.
  scenario.true_rates.resize(scenario.true_lambda.size());
  for (Eigen::Index m = 0; m < scenario.true_lambda.size(); ++m)
    scenario.true_rates[m] = std::exp(scenario.true_lambda[m]);
  scenario.catalog = std::move(catalog);
  scenario.true_params = true_params;
  scenario.rng_seed = seed;
  return scenario;
}

// Independent per-slot Poisson counts at the scenario's true rates. Slots are
// drawn in slot-major order, so for a fixed seed the first n columns of a
// longer simulation equal a shorter one: request histories over a slot grid
// nest.
inline RequestHistory gen_requests(const SyntheticScenario& scenario, int n_slots,
                                   std::uint64_t seed) {
  if (n_slots < 1) throw InvalidInputError("gen_requests: n_slots must be >= 1");
  const int m_count = scenario.content_count();
  Rng rng(seed);
  RequestHistory history;
  history.counts.resize(m_count, n_slots);
  for (int n = 0; n < n_slots; ++n)
    for (int m = 0; m < m_count; ++m)
      history.counts(m, n) = static_cast<int>(rng.poisson(scenario.true_rates[m]));
  return history;
}

// Convenience wiring of the named substreams: features and the latent draw
// get independent streams derived from one base seed.
inline SyntheticScenario make_scenario(int m_contents, const KernelParams& true_params,
                                       std::uint64_t base_seed,
                                       const FeatureModel& features = FeatureModel{}) {
  Catalog catalog = gen_features(m_contents, derive_seed(base_seed, Stream::kFeatures), features);
  SyntheticScenario scenario = gen_ground_truth(std::move(catalog), true_params,
                                                derive_seed(base_seed, Stream::kLatent));
  scenario.rng_seed = base_seed;
  return scenario;
}

}  // namespace popgp
