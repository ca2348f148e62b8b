#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "popgp/errors.hpp"
#include "popgp/model.hpp"
#include "popgp/rng.hpp"

namespace popgp {

// Fixed-step HMC configuration. The mass matrix is the identity; kinetic
// energy is p.p/2 and position updates use the momentum directly.
struct HmcConfig {
  double step_size = 0.015;
  int leapfrog_steps = 20;
  int total_samples = 5000;
  int burn_in = 2500;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(step_size > 0.0) || !std::isfinite(step_size))
      throw InvalidInputError("HmcConfig: step_size must be positive and finite");
    if (leapfrog_steps < 1) throw InvalidInputError("HmcConfig: leapfrog_steps must be >= 1");
    if (total_samples < 1) throw InvalidInputError("HmcConfig: total_samples must be >= 1");
    if (burn_in < 0 || burn_in >= total_samples)
      throw InvalidInputError("HmcConfig: burn_in must lie in [0, total_samples)");
  }
};

using PotentialFn = std::function<double(const Vec&)>;
using GradientFn = std::function<Vec(const Vec&)>;

// H(q, p) = psi(q) + p.p/2. With the identity mass matrix the constant
// (D/2) log(2 pi) term cancels in every Hamiltonian difference and is
// dropped.
inline double hamiltonian(const Vec& position, const Vec& momentum, const PotentialFn& psi) {
  return psi(position) + 0.5 * momentum.squaredNorm();
}

struct LeapfrogResult {
  Vec position;
  Vec momentum;
  bool divergent = false;
};

// Standard leapfrog: a half momentum step, L-1 interleaved full position and
// momentum steps, a final position step and a closing half momentum step.
// (Write-ups sometimes show a full-eps momentum update on both sides of each
// position step; that double-counts the force and is not the symplectic
// integrator, so the half-step form is used here.) A gradient failure or a
// non-finite update marks the trajectory divergent; the caller rejects it.
inline LeapfrogResult leapfrog(const Vec& position, const Vec& momentum, const HmcConfig& config,
                               const GradientFn& grad) {
  config.validate();
  if (position.size() != momentum.size())
    throw InvalidInputError("leapfrog: position and momentum dimensions differ");
  const double eps = config.step_size;
  Vec q = position;
  Vec p = momentum;
  try {
    p.noalias() -= 0.5 * eps * grad(q);
    for (int step = 0; step < config.leapfrog_steps; ++step) {
      q.noalias() += eps * p;
      if (!q.allFinite()) return {std::move(q), std::move(p), true};
      if (step + 1 < config.leapfrog_steps) p.noalias() -= eps * grad(q);
    }
    p.noalias() -= 0.5 * eps * grad(q);
  } catch (const NumericalError&) {
    return {std::move(q), std::move(p), true};
  }
  const bool divergent = !q.allFinite() || !p.allFinite();
  return {std::move(q), std::move(p), divergent};
}

struct HmcStepResult {
  Vec state;
  bool accepted = false;
  double delta_h = 0.0;
  bool divergent = false;
  double psi_state = 0.0;         // potential at the returned state
  double hamiltonian_state = 0.0; // H at the returned state under this step's momentum
};

// Trajectories whose Hamiltonian error exceeds this are treated as divergent
// and auto-rejected instead of overflowing the acceptance exponential.
inline constexpr double kDivergenceThreshold = 1000.0;

// One proposal: draw p ~ N(0, I), integrate, accept with min(1, e^{-dH}).
// The current state's potential is passed in so it is not recomputed every
// step; use the convenience overload when it is unknown.
inline HmcStepResult hmc_step(const Vec& current, double current_psi, const HmcConfig& config,
                              const PotentialFn& psi, const GradientFn& grad, Rng& rng) {
  const Eigen::Index d = current.size();
  Vec momentum(d);
  for (Eigen::Index i = 0; i < d; ++i) momentum[i] = rng.normal();
  const double h_current = current_psi + 0.5 * momentum.squaredNorm();

  LeapfrogResult traj = leapfrog(current, momentum, config, grad);
  double psi_proposal = std::numeric_limits<double>::infinity();
  if (!traj.divergent) {
    try {
      psi_proposal = psi(traj.position);
    } catch (const NumericalError&) {
      traj.divergent = true;
    }
  }
  const double h_proposal = psi_proposal + 0.5 * traj.momentum.squaredNorm();

  const double delta_h = h_proposal - h_current;
  const bool divergent =
      traj.divergent || !std::isfinite(delta_h) || std::abs(delta_h) > kDivergenceThreshold;

  // The uniform draw happens unconditionally so the random stream does not
  // depend on the divergence branch.
  const double u = rng.uniform();
  const bool accepted = !divergent && (delta_h <= 0.0 || u < std::exp(-delta_h));
  if (accepted)
    return {std::move(traj.position), true, delta_h, divergent, psi_proposal, h_proposal};
  return {current, false, delta_h, divergent, current_psi, h_current};
}

inline HmcStepResult hmc_step(const Vec& current, const HmcConfig& config, const PotentialFn& psi,
                              const GradientFn& grad, Rng& rng) {
  return hmc_step(current, psi(current), config, psi, grad, rng);
}

// A generic chain over flat states.
struct SampleChain {
  std::vector<Vec> samples;                // post burn-in states, in order
  std::vector<char> accepted;              // one flag per proposal, whole run
  std::vector<double> hamiltonian_trace;   // H of the retained state at each step
  int divergences = 0;

  double acceptance_rate() const {
    if (accepted.empty()) return 0.0;
    double total = 0.0;
    for (char a : accepted) total += a ? 1.0 : 0.0;
    return total / static_cast<double>(accepted.size());
  }
};

// Runs total_samples proposals from a seeded deterministic RNG and discards
// the first burn_in states.
inline SampleChain run_chain(const Vec& init, const HmcConfig& config, const PotentialFn& psi,
                             const GradientFn& grad) {
  config.validate();
  if (!init.allFinite()) throw InvalidInputError("run_chain: init has non-finite entries");
  double current_psi = psi(init);
  if (!std::isfinite(current_psi))
    throw InvalidInputError("run_chain: psi(init) is not finite");

  Rng rng(config.rng_seed);
  SampleChain chain;
  chain.samples.reserve(config.total_samples - config.burn_in);
  chain.accepted.reserve(config.total_samples);
  chain.hamiltonian_trace.reserve(config.total_samples);

  Vec current = init;
  for (int step = 0; step < config.total_samples; ++step) {
    HmcStepResult result = hmc_step(current, current_psi, config, psi, grad, rng);
    if (result.accepted) {
      current = std::move(result.state);
      current_psi = result.psi_state;
    }
    chain.accepted.push_back(result.accepted ? 1 : 0);
    chain.hamiltonian_trace.push_back(result.hamiltonian_state);
    if (result.divergent) ++chain.divergences;
    if (step >= config.burn_in) chain.samples.push_back(current);
  }
  return chain;
}

// Posterior chain over latent states, with enough metadata to serialize and
// replay.
struct PosteriorChain {
  std::vector<LatentState> samples;
  std::vector<char> accepted;
  std::vector<double> hamiltonian_trace;
  int content_count = 0;
  int feature_dim = 0;
  int divergences = 0;
  HmcConfig config;

  int sample_count() const { return static_cast<int>(samples.size()); }

  double acceptance_rate() const {
    if (accepted.empty()) return 0.0;
    double total = 0.0;
    for (char a : accepted) total += a ? 1.0 : 0.0;
    return total / static_cast<double>(accepted.size());
  }
};

}  // namespace popgp
