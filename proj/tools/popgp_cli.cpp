// Command-line front end: experiment sweeps (fig2, fig3, tables) plus
// single-dataset fitting and prediction. All randomness flows from the seeds
// given here (or recorded in input files), so every artifact is reproducible
// byte-for-byte.
//
// On failure the process exits nonzero after printing a single
// machine-readable line to stderr:  error: {"type":...,"message":...}

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <popgp.hpp>

namespace {

struct SweepOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int trials = 0;
  bool smoke = false;
  bool seed_given = false;
  bool trials_given = false;
};

// Attaches the flags shared by the sweep subcommands.
void add_sweep_options(CLI::App* cmd, SweepOptions& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file overriding the defaults");
  cmd->add_option("--out-dir", opts.out_dir, "Directory for the output CSV (default '.')");
  cmd->add_option("--seed", opts.seed, "Base RNG seed (default 0)");
  cmd->add_option("--trials", opts.trials, "Monte Carlo trials per grid cell (default 20)");
  cmd->add_flag("--smoke", opts.smoke,
                "Fast profile: M=10, N=25, 1 trial, 500 samples (CI-sized)");
}

template <typename T>
void read_key(const nlohmann::json& json, const char* key, T& target) {
  if (json.contains(key)) target = json.at(key).get<T>();
}

// Loads a JSON config file onto the defaults. Unknown keys are rejected so
// typos fail loudly.
void apply_config_file(popgp::ExperimentConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw popgp::InvalidInputError("cannot open '" + path + "' for reading");
  nlohmann::json json = nlohmann::json::parse(in, nullptr, false);
  if (json.is_discarded() || !json.is_object())
    throw popgp::ParseError(path + ": config must be a JSON object");
  static const std::vector<std::string> known = {
      "m_contents",  "n_slots_grid", "trials",        "seed",
      "prior_shape", "prior_rate",   "true_theta",    "bernoulli_probs",
      "normal_dims", "step_size",    "leapfrog_steps", "total_samples",
      "burn_in"};
  for (const auto& item : json.items())
    if (std::find(known.begin(), known.end(), item.key()) == known.end())
      throw popgp::ParseError(path + ": unknown config key '" + item.key() + "'");
  try {
    read_key(json, "m_contents", config.m_contents);
    read_key(json, "n_slots_grid", config.n_slots_grid);
    read_key(json, "trials", config.trials);
    read_key(json, "seed", config.rng_seed);
    read_key(json, "prior_shape", config.prior_shape);
    read_key(json, "prior_rate", config.prior_rate);
    if (json.contains("true_theta")) {
      const auto values = json.at("true_theta").get<std::vector<double>>();
      config.true_params.theta =
          Eigen::Map<const popgp::Vec>(values.data(), static_cast<int>(values.size()));
    }
    read_key(json, "bernoulli_probs", config.features.bernoulli_probs);
    read_key(json, "normal_dims", config.features.normal_dims);
    read_key(json, "step_size", config.hmc.step_size);
    read_key(json, "leapfrog_steps", config.hmc.leapfrog_steps);
    read_key(json, "total_samples", config.hmc.total_samples);
    read_key(json, "burn_in", config.hmc.burn_in);
  } catch (const nlohmann::json::exception& e) {
    throw popgp::ParseError(path + ": " + e.what());
  }
}

popgp::ExperimentConfig build_config(const SweepOptions& opts) {
  popgp::ExperimentConfig config;
  if (!opts.config_path.empty()) apply_config_file(config, opts.config_path);
  if (opts.smoke) config = popgp::smoke_profile(config);
  if (opts.seed_given) config.rng_seed = opts.seed;
  if (opts.trials_given) config.trials = opts.trials;
  config.validate();
  return config;
}

std::string out_path(const SweepOptions& opts, const char* name) {
  std::filesystem::create_directories(opts.out_dir);
  return (std::filesystem::path(opts.out_dir) / name).string();
}

int total_failed(const std::vector<popgp::RmseCell>& cells) {
  int failed = 0;
  for (const auto& cell : cells) failed += cell.trials_failed;
  return failed;
}

void run_fig2_cmd(const SweepOptions& opts) {
  const popgp::ExperimentConfig config = build_config(opts);
  const popgp::RmseReport report = popgp::run_fig2(config);
  const std::string path = out_path(opts, "fig2.csv");
  popgp::write_fig2_csv(path, report);
  std::cout << "wrote " << path << " (" << report.cells.size() << " cells, "
            << total_failed(report.cells) << " failed fits)\n";
}

void run_fig3_cmd(const SweepOptions& opts) {
  const popgp::ExperimentConfig config = build_config(opts);
  const popgp::RmseReport report = popgp::run_fig3(config);
  const std::string path = out_path(opts, "fig3.csv");
  popgp::write_fig3_csv(path, report);
  std::cout << "wrote " << path << " (" << report.cells.size() << " cells, "
            << total_failed(report.cells) << " failed fits)\n";
}

void run_tables_cmd(const SweepOptions& opts) {
  const popgp::ExperimentConfig config = build_config(opts);
  const popgp::HyperRecoveryReport report = popgp::run_tables(config);
  const std::string path = out_path(opts, "tables.csv");
  popgp::write_tables_csv(path, report);
  int failed = 0;
  for (const auto& cell : report.cells) failed += cell.trials_failed;
  std::cout << "wrote " << path << " (" << report.cells.size() << " cells, " << failed
            << " failed fits)\n";
}

struct FitOptions {
  std::string scenario_path;
  std::string requests_path;
  std::string out_path;
  int n_slots = 0;
  popgp::HmcConfig hmc;
  double prior_shape = 1.0;
  double prior_rate = 1.0;
  bool seed_given = false;
};

void run_fit_cmd(const FitOptions& opts) {
  const popgp::SyntheticScenario scenario = popgp::load_scenario(opts.scenario_path);
  popgp::RequestHistory history;
  if (!opts.requests_path.empty()) {
    history = popgp::load_requests_csv(opts.requests_path);
    if (history.content_count() != scenario.content_count())
      throw popgp::InvalidInputError(
          "requests file has " + std::to_string(history.content_count()) +
          " contents but the scenario has " + std::to_string(scenario.content_count()));
  } else {
    if (opts.n_slots < 1)
      throw popgp::InvalidInputError("either --requests or --n-slots is required");
    history = popgp::gen_requests(
        scenario, opts.n_slots,
        popgp::derive_seed(scenario.rng_seed, popgp::Stream::kRequests));
  }

  popgp::HmcConfig hmc = opts.hmc;
  if (!opts.seed_given)
    hmc.rng_seed = popgp::derive_seed(scenario.rng_seed, popgp::Stream::kChain,
                                      static_cast<std::uint64_t>(history.slot_count()));
  const auto priors = popgp::GammaHyperPriors::constant(
      static_cast<int>(scenario.true_params.theta.size()), opts.prior_shape, opts.prior_rate);
  const popgp::PosteriorChain chain =
      popgp::fit_posterior(scenario.catalog, popgp::SufficientStats::from_history(history),
                           priors, hmc);
  popgp::save_chain(opts.out_path, chain);

  char rate[32];
  std::snprintf(rate, sizeof(rate), "%.3f", chain.acceptance_rate());
  std::cout << "wrote " << opts.out_path << " (" << chain.sample_count()
            << " samples, acceptance " << rate << ", " << chain.divergences
            << " divergences)\n";
}

struct PredictOptions {
  std::string chain_path;
  std::string scenario_path;
  std::string out_path;
  std::string features_csv;
};

popgp::FeatureVector parse_features(const std::string& csv, int expected_dim) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= csv.size()) {
    std::size_t end = csv.find(',', start);
    if (end == std::string::npos) end = csv.size();
    const std::string field = csv.substr(start, end - start);
    try {
      std::size_t used = 0;
      values.push_back(std::stod(field, &used));
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw popgp::InvalidInputError("--features: '" + field + "' is not a real number");
    }
    start = end + 1;
    if (end == csv.size()) break;
  }
  if (static_cast<int>(values.size()) != expected_dim)
    throw popgp::InvalidInputError("--features has " + std::to_string(values.size()) +
                                   " values but the chain was fit with feature_dim=" +
                                   std::to_string(expected_dim));
  return Eigen::Map<const popgp::FeatureVector>(values.data(),
                                                static_cast<int>(values.size()));
}

void run_predict_cmd(const PredictOptions& opts) {
  const popgp::PosteriorChain chain = popgp::load_chain(opts.chain_path);
  if (opts.features_csv.empty()) {
    const popgp::RatePrediction prediction = popgp::predict_existing(chain);
    popgp::write_prediction_csv(opts.out_path, prediction);
    std::cout << "wrote " << opts.out_path << " (" << prediction.mean_rate.size()
              << " contents, " << prediction.sample_count << " samples)\n";
    return;
  }
  if (opts.scenario_path.empty())
    throw popgp::InvalidInputError("--features requires --scenario for the catalog");
  const popgp::SyntheticScenario scenario = popgp::load_scenario(opts.scenario_path);
  if (scenario.content_count() != chain.content_count)
    throw popgp::InvalidInputError(
        "chain was fit on " + std::to_string(chain.content_count) +
        " contents but the scenario has " + std::to_string(scenario.content_count()));
  const popgp::FeatureVector x_new = parse_features(opts.features_csv, chain.feature_dim);
  const popgp::NewContentPrediction prediction =
      popgp::predict_new_content(chain, x_new, scenario.catalog);
  popgp::write_new_content_csv(opts.out_path, prediction);
  std::cout << "wrote " << opts.out_path << " (mean rate "
            << popgp::detail::fmt_double(prediction.mean_rate) << ", "
            << prediction.skipped_count << " skipped)\n";
}

int report_error(const char* type, const std::string& message) {
  const nlohmann::json err{{"type", type}, {"message", message}};
  std::cerr << "error: " << err.dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical Poisson-GP content popularity: fitting, prediction and "
               "synthetic experiments"};
  app.require_subcommand(1);

  SweepOptions fig2_opts, fig3_opts, tables_opts;
  CLI::App* fig2 = app.add_subcommand(
      "fig2", "Type-1 RMSE sweep: posterior-mean rates vs per-content empirical means");
  add_sweep_options(fig2, fig2_opts);
  CLI::App* fig3 = app.add_subcommand(
      "fig3", "Type-2 RMSE sweep: held-out content predicted from its features");
  add_sweep_options(fig3, fig3_opts);
  CLI::App* tables = app.add_subcommand(
      "tables", "Hyperparameter recovery: posterior means of theta over the (M, N) grid");
  add_sweep_options(tables, tables_opts);

  FitOptions fit_opts;
  CLI::App* fit = app.add_subcommand("fit", "Fit the posterior for one scenario");
  fit->add_option("--scenario", fit_opts.scenario_path, "Scenario file")->required();
  fit->add_option("--out", fit_opts.out_path, "Output chain file")->required();
  fit->add_option("--n-slots", fit_opts.n_slots,
                  "Generate this many request slots from the scenario seed");
  fit->add_option("--requests", fit_opts.requests_path,
                  "Request-history CSV (overrides --n-slots)");
  fit->add_option("--step-size", fit_opts.hmc.step_size, "Leapfrog step size (default 0.015)");
  fit->add_option("--leapfrog-steps", fit_opts.hmc.leapfrog_steps,
                  "Leapfrog steps per proposal (default 20)");
  fit->add_option("--samples", fit_opts.hmc.total_samples,
                  "Total HMC samples including burn-in (default 5000)");
  fit->add_option("--burn-in", fit_opts.hmc.burn_in, "Discarded samples (default 2500)");
  fit->add_option("--prior-shape", fit_opts.prior_shape, "Gamma prior shape (default 1)");
  fit->add_option("--prior-rate", fit_opts.prior_rate, "Gamma prior rate (default 1)");
  CLI::Option* fit_seed =
      fit->add_option("--seed", fit_opts.hmc.rng_seed,
                      "Chain seed (default derived from the scenario seed)");

  PredictOptions predict_opts;
  CLI::App* predict = app.add_subcommand(
      "predict", "Predict rates from a chain (all contents, or one new content)");
  predict->add_option("--chain", predict_opts.chain_path, "Chain file")->required();
  predict->add_option("--out", predict_opts.out_path, "Output CSV")->required();
  predict->add_option("--scenario", predict_opts.scenario_path,
                      "Scenario file providing the catalog (required with --features)");
  predict->add_option("--features", predict_opts.features_csv,
                      "Comma-separated feature vector of a new content");

  CLI11_PARSE(app, argc, argv);

  fig2_opts.seed_given = fig2->count("--seed") > 0;
  fig2_opts.trials_given = fig2->count("--trials") > 0;
  fig3_opts.seed_given = fig3->count("--seed") > 0;
  fig3_opts.trials_given = fig3->count("--trials") > 0;
  tables_opts.seed_given = tables->count("--seed") > 0;
  tables_opts.trials_given = tables->count("--trials") > 0;
  fit_opts.seed_given = fit_seed->count() > 0;

  try {
    if (fig2->parsed()) run_fig2_cmd(fig2_opts);
    if (fig3->parsed()) run_fig3_cmd(fig3_opts);
    if (tables->parsed()) run_tables_cmd(tables_opts);
    if (fit->parsed()) run_fit_cmd(fit_opts);
    if (predict->parsed()) run_predict_cmd(predict_opts);
  } catch (const popgp::ParseError& e) {
    return report_error("parse", e.what());
  } catch (const popgp::InvalidInputError& e) {
    return report_error("invalid_input", e.what());
  } catch (const popgp::NumericalError& e) {
    return report_error("numerical", e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  return 0;
}
