#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <popgp/experiment.hpp>

using popgp::ExperimentConfig;
using popgp::RmseCell;
using popgp::Vec;

namespace {

// Small, fast configuration exercising the full sweep machinery.
ExperimentConfig tiny_config() {
  ExperimentConfig config;
  config.m_contents = {4, 6};
  config.n_slots_grid = {10, 20};
  config.trials = 2;
  config.hmc.total_samples = 60;
  config.hmc.burn_in = 30;
  config.rng_seed = 901;
  return config;
}

}  // namespace

TEST_CASE("rmse of identical vectors is zero", "[experiment]") {
  Vec a(3);
  a << 1.0, 2.0, 3.0;
  CHECK(popgp::compute_rmse(a, a) == 0.0);
}

TEST_CASE("rmse matches a hand-worked example", "[experiment]") {
  Vec est(2), truth(2);
  est << 3.0, 0.0;
  truth << 0.0, 4.0;
  // mean squared error (9 + 16) / 2 = 12.5
  CHECK(popgp::mean_squared_error(est, truth) == Catch::Approx(12.5).epsilon(1e-15));
  CHECK(popgp::compute_rmse(est, truth) == Catch::Approx(std::sqrt(12.5)).epsilon(1e-15));
}

TEST_CASE("rmse agrees with a scalar-loop recomputation", "[experiment]") {
  popgp::Rng rng(311);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 1 + static_cast<int>(rng.uniform_index(8));
    Vec est(n), truth(n);
    for (int i = 0; i < n; ++i) {
      est[i] = rng.normal();
      truth[i] = rng.normal();
    }
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += (est[i] - truth[i]) * (est[i] - truth[i]);
    CHECK(popgp::compute_rmse(est, truth) ==
          Catch::Approx(std::sqrt(acc / n)).epsilon(1e-13));
  }
  CHECK_THROWS_AS(popgp::compute_rmse(Vec::Zero(2), Vec::Zero(3)),
                  popgp::InvalidInputError);
  CHECK_THROWS_AS(popgp::compute_rmse(Vec(), Vec()), popgp::InvalidInputError);
}

TEST_CASE("cell summaries pool per-trial errors as documented", "[experiment]") {
  RmseCell cell;
  cell.bayes_mse = {4.0, 16.0};
  // Pooled: sqrt((4 + 16) / 2) = sqrt(10). Trial spread: per-trial RMSEs are
  // {2, 4}, whose sample standard deviation is sqrt(2), so SE = 1.
  CHECK(cell.rmse_bayes() == Catch::Approx(std::sqrt(10.0)).epsilon(1e-15));
  CHECK(cell.rmse_bayes_se() == Catch::Approx(1.0).epsilon(1e-15));
  CHECK(std::isnan(cell.rmse_mle()));
  CHECK(cell.rmse_mle_se() == 0.0);
}

TEST_CASE("standard error follows sd over sqrt n", "[experiment]") {
  CHECK(popgp::std_error({1.0, 2.0, 3.0}) ==
        Catch::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(popgp::std_error({5.0}) == 0.0);
  CHECK(popgp::mean_of({1.0, 2.0, 3.0, 6.0}) == Catch::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("experiment configs reject malformed settings", "[experiment]") {
  CHECK_NOTHROW(ExperimentConfig{}.validate());

  ExperimentConfig config;
  config.m_contents.clear();
  CHECK_THROWS_AS(config.validate(), popgp::InvalidInputError);

  config = ExperimentConfig{};
  config.n_slots_grid = {25, 25};
  CHECK_THROWS_AS(config.validate(), popgp::InvalidInputError);

  config = ExperimentConfig{};
  config.n_slots_grid = {50, 25};
  CHECK_THROWS_AS(config.validate(), popgp::InvalidInputError);

  config = ExperimentConfig{};
  config.trials = 0;
  CHECK_THROWS_AS(config.validate(), popgp::InvalidInputError);

  config = ExperimentConfig{};
  config.prior_rate = 0.0;
  CHECK_THROWS_AS(config.validate(), popgp::InvalidInputError);

  config = ExperimentConfig{};
  config.features.normal_dims = 2;  // now 5 feature dims vs 4 in true_params
  CHECK_THROWS_AS(config.validate(), popgp::InvalidInputError);
}

TEST_CASE("smoke profile shrinks the sweep to a single fast cell", "[experiment]") {
  const ExperimentConfig smoke = popgp::smoke_profile(ExperimentConfig{});
  CHECK(smoke.m_contents == std::vector<int>{10});
  CHECK(smoke.n_slots_grid == std::vector<int>{25});
  CHECK(smoke.trials == 1);
  CHECK(smoke.hmc.total_samples == 500);
  CHECK(smoke.hmc.burn_in == 250);
  CHECK_NOTHROW(smoke.validate());
}

TEST_CASE("type-1 sweep populates every cell in m-major order", "[experiment]") {
  const ExperimentConfig config = tiny_config();
  const popgp::RmseReport report = popgp::run_fig2(config);
  REQUIRE(report.cells.size() == 4);

  const int expected_m[] = {4, 4, 6, 6};
  const int expected_n[] = {10, 20, 10, 20};
  for (int i = 0; i < 4; ++i) {
    const RmseCell& cell = report.cells[i];
    CHECK(cell.m_contents == expected_m[i]);
    CHECK(cell.n_slots == expected_n[i]);
    CHECK(cell.trials_attempted == config.trials);
    CHECK(cell.trials_failed == 0);
    REQUIRE(cell.bayes_mse.size() == 2);
    REQUIRE(cell.mle_mse.size() == 2);
    CHECK(cell.type2_sq_err.empty());
    CHECK(std::isfinite(cell.rmse_bayes()));
    CHECK(cell.rmse_bayes() >= 0.0);
    CHECK(std::isfinite(cell.rmse_mle()));
  }
}

TEST_CASE("type-1 sweep is deterministic for a fixed seed", "[experiment]") {
  ExperimentConfig config = tiny_config();
  config.m_contents = {5};
  config.n_slots_grid = {15};
  const popgp::RmseReport a = popgp::run_fig2(config);
  const popgp::RmseReport b = popgp::run_fig2(config);
  REQUIRE(a.cells.size() == 1);
  REQUIRE(b.cells.size() == 1);
  CHECK(a.cells[0].bayes_mse == b.cells[0].bayes_mse);
  CHECK(a.cells[0].mle_mse == b.cells[0].mle_mse);
}

TEST_CASE("type-2 sweep scores one held-out content per trial", "[experiment]") {
  ExperimentConfig config = tiny_config();
  config.m_contents = {5};
  config.n_slots_grid = {15};
  const popgp::RmseReport report = popgp::run_fig3(config);
  REQUIRE(report.cells.size() == 1);
  const RmseCell& cell = report.cells[0];
  CHECK(cell.trials_attempted == 2);
  REQUIRE(cell.type2_sq_err.size() == 2);
  CHECK(cell.bayes_mse.empty());
  for (double sq : cell.type2_sq_err) {
    CHECK(std::isfinite(sq));
    CHECK(sq >= 0.0);
  }
  CHECK(std::isfinite(cell.rmse_type2()));
}

TEST_CASE("hyperparameter sweep reports positive posterior means", "[experiment]") {
  ExperimentConfig config = tiny_config();
  config.m_contents = {6};
  config.n_slots_grid = {20};
  const popgp::HyperRecoveryReport report = popgp::run_tables(config);
  REQUIRE(report.cells.size() == 1);
  const popgp::HyperCell& cell = report.cells[0];
  REQUIRE(cell.theta_posterior_mean_per_trial.size() == 2);
  const Vec mean = cell.theta_posterior_mean();
  REQUIRE(mean.size() == 6);
  CHECK((mean.array() > 0.0).all());
  CHECK(mean.array().isFinite().all());
}

TEST_CASE("an empty hyperparameter cell refuses to summarize", "[experiment]") {
  popgp::HyperCell cell;
  CHECK_THROWS_AS(cell.theta_posterior_mean(), popgp::InvalidInputError);
}

TEST_CASE("trial standard error shrinks as trials grow", "[experiment]") {
  ExperimentConfig config;
  config.m_contents = {6};
  config.n_slots_grid = {15};
  config.hmc.total_samples = 300;
  config.hmc.burn_in = 150;
  config.rng_seed = 777;

  config.trials = 5;
  const popgp::RmseReport few = popgp::run_fig2(config);
  config.trials = 20;
  const popgp::RmseReport many = popgp::run_fig2(config);

  // Trials are seeded by index, so the 5-trial run is a subset of the
  // 20-trial run and the comparison is deterministic.
  CHECK(many.cells[0].rmse_bayes_se() < few.cells[0].rmse_bayes_se());
  CHECK(many.cells[0].rmse_mle_se() < few.cells[0].rmse_mle_se());
  for (const popgp::RmseCell& cell : many.cells) {
    CHECK(cell.rmse_bayes() >= 0.0);
    CHECK(cell.rmse_mle() >= 0.0);
  }
}
