#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <popgp/diagnostics.hpp>
#include <popgp/fit.hpp>
#include <popgp/sampler.hpp>
#include <popgp/synthetic.hpp>

#include "support/reference.hpp"

using popgp::GradientFn;
using popgp::HmcConfig;
using popgp::PotentialFn;
using popgp::Rng;
using popgp::Vec;

namespace {

HmcConfig config_for(double eps, int steps, int total = 1, int burn = 0,
                     std::uint64_t seed = 0) {
  HmcConfig config;
  config.step_size = eps;
  config.leapfrog_steps = steps;
  config.total_samples = total;
  config.burn_in = burn;
  config.rng_seed = seed;
  return config;
}

const PotentialFn kStandardGaussian = [](const Vec& q) { return 0.5 * q.squaredNorm(); };
const GradientFn kStandardGaussianGrad = [](const Vec& q) { return Vec(q); };

}  // namespace

TEST_CASE("hamiltonian is potential plus kinetic energy", "[sampler]") {
  Vec q(2);
  q << 0.3, -0.7;
  CHECK(popgp::hamiltonian(q, Vec::Zero(2), kStandardGaussian) ==
        Catch::Approx(kStandardGaussian(q)).epsilon(1e-15));

  Vec p(2);
  p << 3.0, 4.0;
  CHECK(popgp::hamiltonian(q, p, [](const Vec&) { return 0.0; }) == 12.5);

  double kinetic = 0.0;
  for (int i = 0; i < p.size(); ++i) kinetic += 0.5 * p[i] * p[i];
  CHECK(popgp::hamiltonian(q, p, kStandardGaussian) ==
        Catch::Approx(kStandardGaussian(q) + kinetic).epsilon(1e-15));
}

TEST_CASE("leapfrog free particle is a pure drift", "[sampler]") {
  Vec q(3), p(3);
  q << 1.0, -2.0, 0.5;
  p << 0.3, 0.1, -0.7;
  const auto result = popgp::leapfrog(q, p, config_for(0.05, 12),
                                      [](const Vec& x) { return Vec(Vec::Zero(x.size())); });
  CHECK_FALSE(result.divergent);
  CHECK(result.position.isApprox(q + 12 * 0.05 * p, 1e-13));
  CHECK(result.momentum.isApprox(p, 0.0));
}

TEST_CASE("free-particle leapfrog is a unit-determinant shear", "[sampler]") {
  // In 1-D the map is linear: (q,p) -> (q + L*eps*p, p). Recover its matrix
  // by integrating the basis vectors; the determinant must be exactly 1.
  const GradientFn zero = [](const Vec& x) { return Vec(Vec::Zero(x.size())); };
  const HmcConfig config = config_for(0.1, 7);
  auto map = [&](double q0, double p0) {
    Vec q(1), p(1);
    q << q0;
    p << p0;
    const auto r = popgp::leapfrog(q, p, config, zero);
    return std::pair<double, double>(r.position[0], r.momentum[0]);
  };
  const auto [a, c] = map(1.0, 0.0);  // first column
  const auto [b, d] = map(0.0, 1.0);  // second column
  CHECK(a * d - b * c == Catch::Approx(1.0).epsilon(1e-14));
  CHECK(c == 0.0);
}

TEST_CASE("leapfrog is reversible on a quadratic target", "[sampler]") {
  Vec q(3), p(3);
  q << 0.4, -1.2, 0.9;
  p << -0.3, 0.8, 0.2;
  const HmcConfig config = config_for(0.05, 30);
  const auto forward = popgp::leapfrog(q, p, config, kStandardGaussianGrad);
  const auto back =
      popgp::leapfrog(forward.position, -forward.momentum, config, kStandardGaussianGrad);
  CHECK((back.position - q).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((back.momentum + p).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("leapfrog matches an independently coded trajectory", "[sampler]") {
  Vec q(1), p(1);
  q << 1.0;
  p << 0.0;
  const auto lib = popgp::leapfrog(q, p, config_for(0.1, 10), kStandardGaussianGrad);
  const auto [rq, rp] = refimpl::ref_leapfrog(
      q, p, 0.1, 10, [](const Vec& x) { return Vec(x); });
  CHECK(lib.position[0] == Catch::Approx(rq[0]).epsilon(1e-12));
  CHECK(lib.momentum[0] == Catch::Approx(rp[0]).epsilon(1e-12));
}

TEST_CASE("vanishing step size accepts essentially always", "[sampler]") {
  Rng rng(3);
  Vec current = Vec::Zero(2);
  const HmcConfig config = config_for(1e-12, 20);
  int accepted = 0;
  for (int i = 0; i < 100; ++i) {
    const auto result =
        popgp::hmc_step(current, config, kStandardGaussian, kStandardGaussianGrad, rng);
    accepted += result.accepted ? 1 : 0;
    CHECK(std::abs(result.delta_h) < 1e-9);
  }
  CHECK(accepted == 100);
}

TEST_CASE("oversized steps on a Gaussian target are almost never accepted", "[sampler]") {
  Rng rng(4);
  Vec current = Vec::Zero(3);
  const HmcConfig config = config_for(100.0, 20);
  int accepted = 0;
  for (int i = 0; i < 200; ++i) {
    const auto result =
        popgp::hmc_step(current, config, kStandardGaussian, kStandardGaussianGrad, rng);
    if (result.accepted) {
      ++accepted;
      current = result.state;
    }
  }
  CHECK(accepted < 10);
}

TEST_CASE("chain on a standard 1-D Gaussian recovers its moments", "[sampler]") {
  const HmcConfig config = config_for(0.015, 20, 5000, 0, 101);
  const auto chain =
      popgp::run_chain(Vec::Zero(1), config, kStandardGaussian, kStandardGaussianGrad);
  REQUIRE(chain.samples.size() == 5000);
  double mean = 0.0;
  for (const Vec& s : chain.samples) mean += s[0];
  mean /= 5000.0;
  double var = 0.0;
  for (const Vec& s : chain.samples) var += (s[0] - mean) * (s[0] - mean);
  var /= 5000.0;
  CHECK(std::abs(mean) < 0.1);
  CHECK(std::abs(var - 1.0) < 0.15);
}

TEST_CASE("chains are deterministic given a seed", "[sampler]") {
  const HmcConfig config = config_for(0.2, 5, 200, 50, 99);
  const auto a = popgp::run_chain(Vec::Zero(2), config, kStandardGaussian,
                                  kStandardGaussianGrad);
  const auto b = popgp::run_chain(Vec::Zero(2), config, kStandardGaussian,
                                  kStandardGaussianGrad);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    CHECK((a.samples[i].array() == b.samples[i].array()).all());
  CHECK(a.accepted == b.accepted);
  CHECK(a.hamiltonian_trace == b.hamiltonian_trace);
}

TEST_CASE("burn-in retention arithmetic", "[sampler]") {
  const HmcConfig config = config_for(0.1, 3, 40, 39, 1);
  const auto chain =
      popgp::run_chain(Vec::Zero(1), config, kStandardGaussian, kStandardGaussianGrad);
  CHECK(chain.samples.size() == 1);
  CHECK(chain.accepted.size() == 40);
  CHECK(chain.hamiltonian_trace.size() == 40);
}

TEST_CASE("rejected proposals repeat the previous state bitwise", "[sampler]") {
  // A large step forces frequent rejections.
  const HmcConfig config = config_for(2.9, 7, 400, 0, 5);
  const auto chain =
      popgp::run_chain(Vec::Zero(2), config, kStandardGaussian, kStandardGaussianGrad);
  bool saw_rejection = false;
  for (std::size_t step = 1; step < chain.samples.size(); ++step) {
    if (!chain.accepted[step]) {
      saw_rejection = true;
      CHECK((chain.samples[step].array() == chain.samples[step - 1].array()).all());
    }
  }
  CHECK(saw_rejection);
}

TEST_CASE("non-finite initial potential is rejected up front", "[sampler]") {
  const PotentialFn bad = [](const Vec&) { return std::numeric_limits<double>::infinity(); };
  CHECK_THROWS_AS(
      popgp::run_chain(Vec::Zero(1), config_for(0.1, 2, 10, 0, 1), bad,
                       kStandardGaussianGrad),
      popgp::InvalidInputError);
  Vec nan_init = Vec::Constant(1, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(popgp::run_chain(nan_init, config_for(0.1, 2, 10, 0, 1),
                                   kStandardGaussian, kStandardGaussianGrad),
                  popgp::InvalidInputError);
}

TEST_CASE("gradient failures are counted as divergences, not crashes", "[sampler]") {
  const GradientFn fragile = [](const Vec& q) {
    if (q.cwiseAbs().maxCoeff() > 1.0)
      throw popgp::NumericalError("gradient blew up");
    return Vec(q);
  };
  const HmcConfig config = config_for(1.5, 10, 300, 0, 6);
  const auto chain = popgp::run_chain(Vec::Zero(1), config, kStandardGaussian, fragile);
  CHECK(chain.divergences > 0);
  for (const Vec& s : chain.samples) CHECK(s.allFinite());
}

TEST_CASE("invalid configurations are rejected", "[sampler]") {
  CHECK_THROWS_AS(config_for(0.0, 20).validate(), popgp::InvalidInputError);
  CHECK_THROWS_AS(config_for(0.1, 0).validate(), popgp::InvalidInputError);
  CHECK_THROWS_AS(config_for(0.1, 5, 10, 10).validate(), popgp::InvalidInputError);
}

TEST_CASE("initial state uses smoothed log rates and unit hyperparameters", "[sampler]") {
  popgp::RequestHistory history;
  history.counts.resize(2, 4);
  history.counts << 0, 0, 0, 0, 3, 1, 2, 2;
  const auto stats = popgp::SufficientStats::from_history(history);
  const auto state = popgp::initial_state(stats, 4);
  CHECK(state.lambda[0] == Catch::Approx(std::log(0.5 / 4.0)).epsilon(1e-15));
  CHECK(state.lambda[1] == Catch::Approx(std::log(8.5 / 4.0)).epsilon(1e-15));
  CHECK(state.phi.size() == 6);
  CHECK((state.phi.array() == 0.0).all());
}

TEST_CASE("posterior fit on a small synthetic instance mixes", "[sampler]") {
  const popgp::KernelParams truth{[] {
    Vec t(6);
    t << 0.0001, 0.1, 0.25, 0.0, 0.1, 0.5;
    return t;
  }()};
  const auto scenario = popgp::make_scenario(10, truth, 77);
  const auto history = popgp::gen_requests(scenario, 25, 78);
  HmcConfig config;  // library defaults: eps 0.015, L 20, 5000 samples
  config.rng_seed = 79;
  const auto chain = popgp::fit_posterior(scenario.catalog, history,
                                          popgp::GammaHyperPriors::constant(6), config);
  CHECK(chain.sample_count() == 2500);
  CHECK(chain.content_count == 10);
  CHECK(chain.feature_dim == 4);
  // The conservative default step keeps acceptance high on a smooth
  // ten-content posterior; anything below 0.4 would signal divergences.
  const double rate = chain.acceptance_rate();
  CHECK(rate > 0.4);
  CHECK(rate <= 1.0);

  // The latent series should carry usable information per retained sample.
  std::vector<double> series;
  for (const auto& s : chain.samples) series.push_back(s.lambda[0]);
  CHECK(popgp::effective_sample_size(series) > 10.0);
}

TEST_CASE("batch-means standard error shrinks with series length", "[sampler]") {
  Rng rng(8);
  std::vector<double> short_series, long_series;
  for (int i = 0; i < 400; ++i) short_series.push_back(rng.normal());
  for (int i = 0; i < 6400; ++i) long_series.push_back(rng.normal());
  CHECK(popgp::batch_means_se(long_series) < popgp::batch_means_se(short_series));
}
