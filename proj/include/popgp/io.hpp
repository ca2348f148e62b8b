#pragma once

// On-disk formats.
//
// Scenarios and chains are line-delimited records under a one-line header
//   #popgp-<kind> v1 {json}
// where the JSON object carries dimensions, seeds and sampler settings.
// Request matrices and reports are plain CSV with a one-line header. All
// reals are written with shortest-round-trip formatting, so load(save(x))
// reproduces every double bit-for-bit and files diff cleanly.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include <popgp/errors.hpp>
#include <popgp/experiment.hpp>
#include <popgp/model.hpp>
#include <popgp/predict.hpp>
#include <popgp/sampler.hpp>
#include <popgp/synthetic.hpp>

namespace popgp {

namespace detail {

inline std::string fmt_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw NumericalError("fmt_double: value does not format");
  return std::string(buf, ptr);
}

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot open '" + path + "' for writing");
  return out;
}

inline std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open '" + path + "' for reading");
  return in;
}

// Line-oriented reader that tracks position for error messages.
class LineReader {
 public:
  LineReader(std::ifstream stream, std::string path)
      : stream_(std::move(stream)), path_(std::move(path)) {}

  bool next(std::string& line) {
    if (!std::getline(stream_, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_number_;
    return true;
  }

  std::string require(const char* what) {
    std::string line;
    if (!next(line)) fail(std::string("unexpected end of file, expected ") + what);
    return line;
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError(path_ + ":" + std::to_string(line_number_) + ": " + message);
  }

  const std::string& path() const { return path_; }
  int line_number() const { return line_number_; }

 private:
  std::ifstream stream_;
  std::string path_;
  int line_number_ = 0;
};

inline std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (start <= line.size()) {
    std::size_t end = line.find(sep, start);
    if (end == std::string_view::npos) end = line.size();
    fields.push_back(line.substr(start, end - start));
    start = end + 1;
    if (end == line.size()) break;
  }
  return fields;
}

inline double parse_double(const LineReader& reader, std::string_view field, int index) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    reader.fail("field " + std::to_string(index) + ": expected a real number, got '" +
                std::string(field) + "'");
  return value;
}

inline long long parse_int(const LineReader& reader, std::string_view field, int index) {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    reader.fail("field " + std::to_string(index) + ": expected an integer, got '" +
                std::string(field) + "'");
  return value;
}

// Parses "#popgp-<kind> v1 {json}" and returns the JSON object.
inline nlohmann::json parse_header(LineReader& reader, const std::string& kind) {
  const std::string line = reader.require("header line");
  const std::string magic = "#popgp-" + kind + " v1 ";
  if (line.rfind(magic, 0) != 0)
    reader.fail("expected header '" + magic + "{...}'");
  nlohmann::json header = nlohmann::json::parse(line.substr(magic.size()), nullptr, false);
  if (header.is_discarded() || !header.is_object())
    reader.fail("header JSON does not parse");
  return header;
}

template <typename T>
T header_field(LineReader& reader, const nlohmann::json& header, const char* key) {
  if (!header.contains(key))
    reader.fail(std::string("header missing field '") + key + "'");
  try {
    return header.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    reader.fail(std::string("header field '") + key + "' has the wrong type");
  }
}

// Record line: "<keyword> v1 v2 ...". Checks the keyword and the value count.
inline std::vector<std::string_view> record_fields(const LineReader& reader,
                                                   std::string_view line,
                                                   std::string_view keyword, int expected) {
  std::vector<std::string_view> fields = split_fields(line, ' ');
  if (fields.empty() || fields.front() != keyword)
    reader.fail("expected a '" + std::string(keyword) + "' record");
  if (expected >= 0 && static_cast<int>(fields.size()) != expected + 1)
    reader.fail("'" + std::string(keyword) + "' record has " +
                std::to_string(fields.size() - 1) + " values, expected " +
                std::to_string(expected));
  return fields;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------------

inline void save_scenario(const std::string& path, const SyntheticScenario& scenario) {
  std::ofstream out = detail::open_for_write(path);
  const int m = scenario.content_count();
  const int q = scenario.true_params.feature_dim();
  nlohmann::json header{
      {"content_count", m}, {"feature_dim", q}, {"rng_seed", scenario.rng_seed}};
  out << "#popgp-scenario v1 " << header.dump() << "\n";
  for (const FeatureVector& x : scenario.catalog) {
    out << "content";
    for (int d = 0; d < q; ++d) out << ' ' << detail::fmt_double(x[d]);
    out << "\n";
  }
  out << "true_theta";
  for (int i = 0; i < scenario.true_params.theta.size(); ++i)
    out << ' ' << detail::fmt_double(scenario.true_params.theta[i]);
  out << "\n";
  out << "true_lambda";
  for (int i = 0; i < m; ++i) out << ' ' << detail::fmt_double(scenario.true_lambda[i]);
  out << "\n";
  if (!out) throw InvalidInputError("write to '" + path + "' failed");
}

inline SyntheticScenario load_scenario(const std::string& path) {
  detail::LineReader reader(detail::open_for_read(path), path);
  const nlohmann::json header = detail::parse_header(reader, "scenario");
  const int m = detail::header_field<int>(reader, header, "content_count");
  const int q = detail::header_field<int>(reader, header, "feature_dim");
  if (m < 1 || q < 0) reader.fail("header dimensions out of range");

  SyntheticScenario scenario;
  scenario.rng_seed = detail::header_field<std::uint64_t>(reader, header, "rng_seed");
  scenario.catalog.reserve(m);
  for (int i = 0; i < m; ++i) {
    const std::string line = reader.require("a 'content' record");
    const auto fields = detail::record_fields(reader, line, "content", q);
    FeatureVector x(q);
    for (int d = 0; d < q; ++d) x[d] = detail::parse_double(reader, fields[d + 1], d + 1);
    scenario.catalog.push_back(std::move(x));
  }
  {
    const std::string line = reader.require("a 'true_theta' record");
    const auto fields = detail::record_fields(reader, line, "true_theta", q + 2);
    scenario.true_params.theta.resize(q + 2);
    for (int i = 0; i < q + 2; ++i)
      scenario.true_params.theta[i] = detail::parse_double(reader, fields[i + 1], i + 1);
  }
  {
    const std::string line = reader.require("a 'true_lambda' record");
    const auto fields = detail::record_fields(reader, line, "true_lambda", m);
    scenario.true_lambda.resize(m);
    for (int i = 0; i < m; ++i)
      scenario.true_lambda[i] = detail::parse_double(reader, fields[i + 1], i + 1);
  }
  // Scalar std::exp to match the generator bit-for-bit.
  scenario.true_rates.resize(scenario.true_lambda.size());
  for (Eigen::Index m = 0; m < scenario.true_lambda.size(); ++m)
    scenario.true_rates[m] = std::exp(scenario.true_lambda[m]);
  scenario.true_params.validate();
  validate_catalog(scenario.catalog);
  return scenario;
}

// ---------------------------------------------------------------------------
// Chain files
// ---------------------------------------------------------------------------

inline void save_chain(const std::string& path, const PosteriorChain& chain) {
  std::ofstream out = detail::open_for_write(path);
  nlohmann::json header{{"content_count", chain.content_count},
                        {"feature_dim", chain.feature_dim},
                        {"sample_count", chain.sample_count()},
                        {"divergences", chain.divergences},
                        {"step_size", chain.config.step_size},
                        {"leapfrog_steps", chain.config.leapfrog_steps},
                        {"total_samples", chain.config.total_samples},
                        {"burn_in", chain.config.burn_in},
                        {"rng_seed", chain.config.rng_seed}};
  out << "#popgp-chain v1 " << header.dump() << "\n";
  for (const LatentState& state : chain.samples) {
    out << "sample";
    const Vec flat = state.flatten();
    for (int i = 0; i < flat.size(); ++i) out << ' ' << detail::fmt_double(flat[i]);
    out << "\n";
  }
  out << "accepted";
  for (char a : chain.accepted) out << ' ' << (a ? '1' : '0');
  out << "\n";
  out << "hamiltonian";
  for (double h : chain.hamiltonian_trace) out << ' ' << detail::fmt_double(h);
  out << "\n";
  if (!out) throw InvalidInputError("write to '" + path + "' failed");
}

inline PosteriorChain load_chain(const std::string& path) {
  detail::LineReader reader(detail::open_for_read(path), path);
  const nlohmann::json header = detail::parse_header(reader, "chain");
  PosteriorChain chain;
  chain.content_count = detail::header_field<int>(reader, header, "content_count");
  chain.feature_dim = detail::header_field<int>(reader, header, "feature_dim");
  chain.divergences = detail::header_field<int>(reader, header, "divergences");
  chain.config.step_size = detail::header_field<double>(reader, header, "step_size");
  chain.config.leapfrog_steps = detail::header_field<int>(reader, header, "leapfrog_steps");
  chain.config.total_samples = detail::header_field<int>(reader, header, "total_samples");
  chain.config.burn_in = detail::header_field<int>(reader, header, "burn_in");
  chain.config.rng_seed = detail::header_field<std::uint64_t>(reader, header, "rng_seed");
  const int sample_count = detail::header_field<int>(reader, header, "sample_count");
  if (sample_count < 1) reader.fail("chain has no samples");
  if (chain.content_count < 1 || chain.feature_dim < 0)
    reader.fail("header dimensions out of range");

  const int flat_size = chain.content_count + chain.feature_dim + 2;
  chain.samples.reserve(sample_count);
  for (int s = 0; s < sample_count; ++s) {
    const std::string line = reader.require("a 'sample' record");
    const auto fields = detail::record_fields(reader, line, "sample", flat_size);
    Vec flat(flat_size);
    for (int i = 0; i < flat_size; ++i)
      flat[i] = detail::parse_double(reader, fields[i + 1], i + 1);
    chain.samples.push_back(LatentState::unflatten(flat, chain.content_count));
  }
  {
    const std::string line = reader.require("an 'accepted' record");
    const auto fields = detail::record_fields(reader, line, "accepted", -1);
    chain.accepted.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (fields[i] != "0" && fields[i] != "1")
        reader.fail("field " + std::to_string(i) + ": expected 0 or 1");
      chain.accepted.push_back(fields[i] == "1" ? 1 : 0);
    }
  }
  {
    const std::string line = reader.require("a 'hamiltonian' record");
    const auto fields = detail::record_fields(reader, line, "hamiltonian", -1);
    chain.hamiltonian_trace.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i)
      chain.hamiltonian_trace.push_back(
          detail::parse_double(reader, fields[i], static_cast<int>(i)));
  }
  return chain;
}

// ---------------------------------------------------------------------------
// Request-history CSV (wide: one row per content, one column per slot)
// ---------------------------------------------------------------------------

inline void save_requests_csv(const std::string& path, const RequestHistory& history) {
  history.validate();
  std::ofstream out = detail::open_for_write(path);
  out << "content";
  for (int n = 0; n < history.slot_count(); ++n) out << ",slot_" << (n + 1);
  out << "\n";
  for (int m = 0; m < history.content_count(); ++m) {
    out << m;
    for (int n = 0; n < history.slot_count(); ++n) out << ',' << history.counts(m, n);
    out << "\n";
  }
  if (!out) throw InvalidInputError("write to '" + path + "' failed");
}

inline RequestHistory load_requests_csv(const std::string& path) {
  detail::LineReader reader(detail::open_for_read(path), path);
  const std::string header = reader.require("CSV header");
  const auto columns = detail::split_fields(header, ',');
  if (columns.empty() || columns.front() != "content")
    reader.fail("expected header starting with 'content'");
  const int n_slots = static_cast<int>(columns.size()) - 1;
  if (n_slots < 1) reader.fail("no slot columns in header");

  std::vector<std::vector<int>> rows;
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line, ',');
    if (static_cast<int>(fields.size()) != n_slots + 1)
      reader.fail("row has " + std::to_string(fields.size()) + " fields, expected " +
                  std::to_string(n_slots + 1));
    std::vector<int> row(n_slots);
    for (int n = 0; n < n_slots; ++n) {
      const long long value = detail::parse_int(reader, fields[n + 1], n + 1);
      if (value < 0) reader.fail("field " + std::to_string(n + 1) + ": negative count");
      row[n] = static_cast<int>(value);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) reader.fail("no content rows");
  RequestHistory history;
  history.counts.resize(static_cast<int>(rows.size()), n_slots);
  for (std::size_t m = 0; m < rows.size(); ++m)
    for (int n = 0; n < n_slots; ++n) history.counts(static_cast<int>(m), n) = rows[m][n];
  history.validate();
  return history;
}

// ---------------------------------------------------------------------------
// Report CSVs
// ---------------------------------------------------------------------------

inline constexpr const char* kFig2CsvHeader =
    "m_contents,n_slots,trials_attempted,trials_failed,"
    "rmse_bayes,rmse_bayes_se,rmse_mle,rmse_mle_se";

inline constexpr const char* kFig3CsvHeader =
    "m_contents,n_slots,trials_attempted,trials_failed,rmse_type2,rmse_type2_se";

inline std::string tables_csv_header(int theta_dim) {
  std::string header = "m_contents,n_slots,trials_attempted,trials_failed";
  for (int q = 0; q < theta_dim; ++q) header += ",theta_" + std::to_string(q);
  return header;
}

inline void write_fig2_csv(const std::string& path, const RmseReport& report) {
  std::ofstream out = detail::open_for_write(path);
  out << kFig2CsvHeader << "\n";
  for (const RmseCell& cell : report.cells)
    out << cell.m_contents << ',' << cell.n_slots << ',' << cell.trials_attempted << ','
        << cell.trials_failed << ',' << detail::fmt_double(cell.rmse_bayes()) << ','
        << detail::fmt_double(cell.rmse_bayes_se()) << ','
        << detail::fmt_double(cell.rmse_mle()) << ','
        << detail::fmt_double(cell.rmse_mle_se()) << "\n";
  if (!out) throw InvalidInputError("write to '" + path + "' failed");
}

inline void write_fig3_csv(const std::string& path, const RmseReport& report) {
  std::ofstream out = detail::open_for_write(path);
  out << kFig3CsvHeader << "\n";
  for (const RmseCell& cell : report.cells)
    out << cell.m_contents << ',' << cell.n_slots << ',' << cell.trials_attempted << ','
        << cell.trials_failed << ',' << detail::fmt_double(cell.rmse_type2()) << ','
        << detail::fmt_double(cell.rmse_type2_se()) << "\n";
  if (!out) throw InvalidInputError("write to '" + path + "' failed");
}

inline void write_tables_csv(const std::string& path, const HyperRecoveryReport& report) {
  std::ofstream out = detail::open_for_write(path);
  if (report.cells.empty()) throw InvalidInputError("write_tables_csv: empty report");
  const Vec first = report.cells.front().theta_posterior_mean();
  out << tables_csv_header(static_cast<int>(first.size())) << "\n";
  for (const HyperCell& cell : report.cells) {
    const Vec theta = cell.theta_posterior_mean();
    out << cell.m_contents << ',' << cell.n_slots << ',' << cell.trials_attempted << ','
        << cell.trials_failed;
    for (int q = 0; q < theta.size(); ++q) out << ',' << detail::fmt_double(theta[q]);
    out << "\n";
  }
  if (!out) throw InvalidInputError("write to '" + path + "' failed");
}

inline constexpr const char* kPredictionCsvHeader =
    "content,mean_rate,quantile_05,quantile_50,quantile_95";

inline void write_prediction_csv(const std::string& path, const RatePrediction& prediction) {
  std::ofstream out = detail::open_for_write(path);
  out << kPredictionCsvHeader << "\n";
  for (int m = 0; m < prediction.mean_rate.size(); ++m)
    out << m << ',' << detail::fmt_double(prediction.mean_rate[m]) << ','
        << detail::fmt_double(prediction.quantile05[m]) << ','
        << detail::fmt_double(prediction.quantile50[m]) << ','
        << detail::fmt_double(prediction.quantile95[m]) << "\n";
  if (!out) throw InvalidInputError("write to '" + path + "' failed");
}

inline constexpr const char* kNewContentCsvHeader =
    "mean_rate,sample_count,clamped_count,skipped_count";

inline void write_new_content_csv(const std::string& path,
                                  const NewContentPrediction& prediction) {
  std::ofstream out = detail::open_for_write(path);
  out << kNewContentCsvHeader << "\n";
  out << detail::fmt_double(prediction.mean_rate) << ','
      << prediction.lambda_conditional_mean_samples.size() << ','
      << prediction.clamped_count << ',' << prediction.skipped_count << "\n";
  if (!out) throw InvalidInputError("write to '" + path + "' failed");
}

}  // namespace popgp
