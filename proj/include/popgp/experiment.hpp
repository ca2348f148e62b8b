#pragma once

// Synthetic-experiment orchestration: RMSE sweeps over (content count M,
// slot count N) grids for type-1 and type-2 prediction, and the
// hyperparameter-recovery sweep reporting posterior means of theta.
//
// Every trial draws its own scenario from a seed derived off the base seed,
// so results are independent of execution order and reproducible
// byte-for-byte. Within a trial, the request matrix is generated once at the
// largest N and shorter histories are its leading columns (gen_requests is
// slot-major, so the prefix equals a fresh run at the smaller N).

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <popgp/baseline.hpp>
#include <popgp/errors.hpp>
#include <popgp/fit.hpp>
#include <popgp/predict.hpp>
#include <popgp/synthetic.hpp>

namespace popgp {

// Ground truth used throughout the synthetic studies:
// theta = (0.0001, 0.1, 0.25, 0, 0.1, 0.5). The third feature scale is
// exactly zero, so that feature carries no signal and its posterior mean
// should shrink toward zero as N grows.
inline KernelParams default_true_params() {
  KernelParams params;
  params.theta.resize(6);
  params.theta << 0.0001, 0.1, 0.25, 0.0, 0.1, 0.5;
  return params;
}

struct ExperimentConfig {
  std::vector<int> m_contents{50, 100};
  std::vector<int> n_slots_grid{25, 50, 100, 200, 400};
  int trials = 20;
  HmcConfig hmc{};
  double prior_shape = 1.0;
  double prior_rate = 1.0;
  KernelParams true_params = default_true_params();
  FeatureModel features{};
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (m_contents.empty()) throw InvalidInputError("experiment: m_contents must be non-empty");
    for (int m : m_contents)
      if (m < 1) throw InvalidInputError("experiment: content counts must be >= 1");
    if (n_slots_grid.empty())
      throw InvalidInputError("experiment: n_slots_grid must be non-empty");
    int prev = 0;
    for (int n : n_slots_grid) {
      if (n <= prev)
        throw InvalidInputError("experiment: n_slots_grid must be strictly increasing and positive");
      prev = n;
    }
    if (trials < 1) throw InvalidInputError("experiment: trials must be >= 1");
    if (!(prior_shape > 0.0) || !(prior_rate > 0.0))
      throw InvalidInputError("experiment: prior shape and rate must be positive");
    hmc.validate();
    true_params.validate();
    features.validate();
    if (features.feature_dim() != true_params.feature_dim())
      throw InvalidInputError("experiment: feature model dimension does not match true_params");
  }
};

// Fast CI profile: one tiny cell with a short chain.
inline ExperimentConfig smoke_profile(ExperimentConfig config) {
  config.m_contents = {10};
  config.n_slots_grid = {25};
  config.trials = 1;
  config.hmc.total_samples = 500;
  config.hmc.burn_in = 250;
  return config;
}

inline double mean_squared_error(const Vec& estimates, const Vec& truth) {
  if (estimates.size() != truth.size())
    throw InvalidInputError("mean_squared_error: length mismatch");
  if (estimates.size() == 0) throw InvalidInputError("mean_squared_error: empty input");
  return (estimates - truth).squaredNorm() / static_cast<double>(estimates.size());
}

// Root mean squared error in the linear rate domain, pooled over contents.
inline double compute_rmse(const Vec& estimates, const Vec& truth) {
  return std::sqrt(mean_squared_error(estimates, truth));
}

inline double mean_of(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

// Standard error of the mean (sample standard deviation / sqrt(n)).
inline double std_error(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const double mean = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

// One (M, N) grid cell. Per-trial mean squared errors are kept so reports
// can expose both the pooled RMSE and honest trial-to-trial spread.
struct RmseCell {
  int m_contents = 0;
  int n_slots = 0;
  int trials_attempted = 0;
  int trials_failed = 0;
  std::vector<double> bayes_mse;    // type-1 posterior-mean estimate vs true rates
  std::vector<double> mle_mse;      // per-content empirical mean vs true rates
  std::vector<double> type2_sq_err; // held-out content, one squared error per trial

  static double pooled_rmse(const std::vector<double>& mse) {
    return mse.empty() ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(mean_of(mse));
  }
  static double trial_se(const std::vector<double>& mse) {
    std::vector<double> rmse(mse.size());
    for (std::size_t i = 0; i < mse.size(); ++i) rmse[i] = std::sqrt(mse[i]);
    return std_error(rmse);
  }

  double rmse_bayes() const { return pooled_rmse(bayes_mse); }
  double rmse_bayes_se() const { return trial_se(bayes_mse); }
  double rmse_mle() const { return pooled_rmse(mle_mse); }
  double rmse_mle_se() const { return trial_se(mle_mse); }
  double rmse_type2() const { return pooled_rmse(type2_sq_err); }
  double rmse_type2_se() const { return trial_se(type2_sq_err); }
};

struct RmseReport {
  std::vector<RmseCell> cells;
};

// One (M, N) cell of the hyperparameter-recovery sweep: per-trial posterior
// means of theta_q (mean over retained samples of e^{phi_q,s}).
struct HyperCell {
  int m_contents = 0;
  int n_slots = 0;
  int trials_attempted = 0;
  int trials_failed = 0;
  std::vector<Vec> theta_posterior_mean_per_trial;

  Vec theta_posterior_mean() const {
    if (theta_posterior_mean_per_trial.empty())
      throw InvalidInputError("HyperCell: no successful trials");
    Vec total = Vec::Zero(theta_posterior_mean_per_trial.front().size());
    for (const Vec& t : theta_posterior_mean_per_trial) total += t;
    return total / static_cast<double>(theta_posterior_mean_per_trial.size());
  }
};

struct HyperRecoveryReport {
  std::vector<HyperCell> cells;
};

namespace detail {

// Shared sweep skeleton for the three runners. Generates `m + holdout`
// contents per scenario, fits on the first m, and hands every successful
// chain to `consume(cell_index, scenario, history, chain)`. Cells are laid
// out m-major: cell_index = m_index * grid_size + grid_index. A chain or
// prediction failure marks that (trial, cell) failed; more than 10% failures
// across the whole sweep aborts the run.
template <typename Consume>
void run_sweep(const ExperimentConfig& config, int holdout,
               std::vector<std::pair<int*, int*>> counters, Consume&& consume) {
  config.validate();
  const int grid_size = static_cast<int>(config.n_slots_grid.size());
  const int n_max = config.n_slots_grid.back();
  const GammaHyperPriors priors = GammaHyperPriors::constant(
      static_cast<int>(config.true_params.theta.size()), config.prior_shape, config.prior_rate);

  int attempted = 0;
  int failed = 0;
  for (std::size_t mi = 0; mi < config.m_contents.size(); ++mi) {
    const int m = config.m_contents[mi];
    for (int trial = 0; trial < config.trials; ++trial) {
      const std::uint64_t trial_seed = derive_seed(
          config.rng_seed, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(trial));
      const SyntheticScenario scenario =
          make_scenario(m + holdout, config.true_params, trial_seed, config.features);
      const Catalog fit_catalog(scenario.catalog.begin(), scenario.catalog.begin() + m);
      const RequestHistory full =
          gen_requests(scenario, n_max, derive_seed(trial_seed, Stream::kRequests));
      for (int gi = 0; gi < grid_size; ++gi) {
        const int n = config.n_slots_grid[gi];
        const std::size_t cell = mi * grid_size + gi;
        ++attempted;
        ++*counters[cell].first;
        RequestHistory history{full.counts.topLeftCorner(m, n)};
        try {
          HmcConfig hmc = config.hmc;
          hmc.rng_seed = derive_seed(trial_seed, Stream::kChain, static_cast<std::uint64_t>(n));
          const PosteriorChain chain =
              fit_posterior(fit_catalog, SufficientStats::from_history(history), priors, hmc);
          consume(cell, scenario, history, chain);
        } catch (const NumericalError&) {
          ++failed;
          ++*counters[cell].second;
        }
      }
    }
  }
  if (10 * failed > attempted)
    throw NumericalError("experiment: more than 10% of fits failed (" +
                         std::to_string(failed) + " of " + std::to_string(attempted) + ")");
}

template <typename Cell>
std::vector<Cell> make_cells(const ExperimentConfig& config) {
  std::vector<Cell> cells;
  cells.reserve(config.m_contents.size() * config.n_slots_grid.size());
  for (int m : config.m_contents)
    for (int n : config.n_slots_grid) {
      Cell cell;
      cell.m_contents = m;
      cell.n_slots = n;
      cells.push_back(std::move(cell));
    }
  return cells;
}

template <typename Cell>
std::vector<std::pair<int*, int*>> counter_view(std::vector<Cell>& cells) {
  std::vector<std::pair<int*, int*>> counters;
  counters.reserve(cells.size());
  for (Cell& cell : cells) counters.push_back({&cell.trials_attempted, &cell.trials_failed});
  return counters;
}

}  // namespace detail

// Type-1 sweep: per cell, RMSE of the posterior-mean rate estimate and of
// the per-content empirical mean, both against the scenario's true rates.
inline RmseReport run_fig2(const ExperimentConfig& config) {
  RmseReport report;
  report.cells = detail::make_cells<RmseCell>(config);
  detail::run_sweep(
      config, /*holdout=*/0, detail::counter_view(report.cells),
      [&](std::size_t cell, const SyntheticScenario& scenario, const RequestHistory& history,
          const PosteriorChain& chain) {
        const RatePrediction pred = predict_existing(chain);
        report.cells[cell].bayes_mse.push_back(
            mean_squared_error(pred.mean_rate, scenario.true_rates));
        report.cells[cell].mle_mse.push_back(
            mean_squared_error(mle_rates(history).rates, scenario.true_rates));
      });
  return report;
}

// Type-2 sweep: each trial holds out one freshly generated content (drawn by
// the same feature process), fits on the remaining M, and scores the
// held-out rate estimate against that content's true rate.
inline RmseReport run_fig3(const ExperimentConfig& config) {
  RmseReport report;
  report.cells = detail::make_cells<RmseCell>(config);
  detail::run_sweep(
      config, /*holdout=*/1, detail::counter_view(report.cells),
      [&](std::size_t cell, const SyntheticScenario& scenario, const RequestHistory& history,
          const PosteriorChain& chain) {
        const int m = static_cast<int>(history.counts.rows());
        const Catalog fit_catalog(scenario.catalog.begin(), scenario.catalog.begin() + m);
        const NewContentPrediction pred =
            predict_new_content(chain, scenario.catalog[m], fit_catalog);
        const double err = pred.mean_rate - scenario.true_rates[m];
        report.cells[cell].type2_sq_err.push_back(err * err);
      });
  return report;
}

// Hyperparameter-recovery sweep: per cell, the posterior mean of each
// theta_q averaged over trials.
inline HyperRecoveryReport run_tables(const ExperimentConfig& config) {
  HyperRecoveryReport report;
  report.cells = detail::make_cells<HyperCell>(config);
  detail::run_sweep(
      config, /*holdout=*/0, detail::counter_view(report.cells),
      [&](std::size_t cell, const SyntheticScenario&, const RequestHistory&,
          const PosteriorChain& chain) {
        Vec total = Vec::Zero(chain.feature_dim + 2);
        for (const LatentState& state : chain.samples) total += state.theta();
        report.cells[cell].theta_posterior_mean_per_trial.push_back(
            total / static_cast<double>(chain.samples.size()));
      });
  return report;
}

}  // namespace popgp
