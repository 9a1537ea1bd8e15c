#ifndef OPE_LAB_EXPERIMENT_HPP
#define OPE_LAB_EXPERIMENT_HPP

#include <algorithm>
#include <charconv>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ope_lab/errors.hpp"
#include "ope_lab/monte_carlo.hpp"
#include "ope_lab/synthetic_env.hpp"

namespace ope_lab {

// Sweep configuration file layout (INI):
//
//   [sweep]        action_space_grid, n_samples, n_replications, estimators, base_seed, threads
//   [environment]  d_x, d_e, cardinalities, beta, epsilon, reward_noise_sd,
//                  direct_effect_strength, pool_size, pool_sampling
//   [model]        ridge_lambda, action_onehot
//   [oracle]       truth_samples
//   [output]       directory
//
// Lists are comma separated. Every key is optional except action_space_grid.
struct SweepConfig {
  std::vector<std::size_t> action_space_grid;
  std::size_t n_samples = 10000;
  std::size_t n_replications = 100;
  std::vector<EstimatorKind> estimators{EstimatorKind::dm, EstimatorKind::ips, EstimatorKind::dr,
                                        EstimatorKind::mips, EstimatorKind::mdr};
  std::uint64_t base_seed = 1;
  unsigned threads = 1;

  std::size_t d_x = 10;
  std::size_t d_e = 3;
  std::vector<int> cardinalities;  // empty: 10 per dimension
  double beta = EnvConfig{}.beta;
  double epsilon = 0.05;
  double reward_noise_sd = 1.0;
  double direct_effect_strength = 0.0;
  std::size_t pool_size = 0;  // 0 turns pool mode off
  PoolSampling pool_sampling = PoolSampling::uniform;

  double ridge_lambda = 1.0;
  bool action_onehot = false;

  std::size_t truth_samples = 1000000;

  std::string output_directory = "results";

  bool operator==(const SweepConfig&) const = default;

  EnvConfig env_config(std::size_t n_actions) const {
    EnvConfig c;
    c.n_actions = n_actions;
    c.d_x = d_x;
    c.d_e = d_e;
    c.cardinalities = cardinalities;
    c.beta = beta;
    c.epsilon = epsilon;
    c.reward_noise_sd = reward_noise_sd;
    c.direct_effect_strength = direct_effect_strength;
    c.pool_size = pool_size;
    c.pool_sampling = pool_sampling;
    return c;
  }

  void validate() const {
    if (action_space_grid.empty()) throw ValidationError("action_space_grid is required and must be non-empty");
    for (std::size_t i = 1; i < action_space_grid.size(); ++i) {
      if (action_space_grid[i] <= action_space_grid[i - 1]) {
        throw ValidationError("action_space_grid must be strictly ascending");
      }
    }
    if (n_replications < 2) throw ValidationError("n_replications must be at least 2");
    if (n_samples < 1) throw ValidationError("n_samples must be at least 1");
    if (estimators.empty()) throw ValidationError("estimators must name at least one estimator");
    if (threads < 1) throw ValidationError("threads must be at least 1");
    if (pool_size == 0 && truth_samples < 2) throw ValidationError("truth_samples must be at least 2");
    if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda)) {
      throw ValidationError("ridge_lambda must be finite and non-negative");
    }
    for (std::size_t n_actions : action_space_grid) env_config(n_actions).validate();
  }
};

enum class ConfigErrorCode { missing_file, syntax, constraint };

class ConfigError : public ValidationError {
 public:
  ConfigError(ConfigErrorCode code, const std::string& what) : ValidationError(what), code_(code) {}
  ConfigErrorCode code() const { return code_; }

 private:
  ConfigErrorCode code_;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline ConfigError bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  return ConfigError(ConfigErrorCode::constraint, key + ": expected " + expected + ", got '" + value + "'");
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty() || s[0] == '-' || s[0] == '+') throw bad_value(key, raw, "a non-negative integer");
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size()) throw bad_value(key, raw, "a non-negative integer");
  return v;
}

inline double parse_real(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || errno != 0 || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw bad_value(key, raw, "a finite real number");
  }
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw bad_value(key, raw, "a boolean");
}

// Shortest text that parses back to exactly v.
inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T, class F>
std::string join(const std::vector<T>& items, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += fmt(items[i]);
  }
  return out;
}

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace detail

inline std::vector<std::size_t> parse_grid(const std::string& text) {
  std::vector<std::size_t> grid;
  for (const std::string& item : detail::split_list(text)) {
    grid.push_back(static_cast<std::size_t>(detail::parse_unsigned("action_space_grid", item)));
  }
  return grid;
}

inline std::vector<EstimatorKind> parse_estimator_list(const std::string& text) {
  std::vector<EstimatorKind> kinds;
  for (const std::string& item : detail::split_list(text)) {
    try {
      const EstimatorKind k = estimator_from_string(item);
      if (std::find(kinds.begin(), kinds.end(), k) != kinds.end()) {
        throw ConfigError(ConfigErrorCode::constraint, "estimators: '" + item + "' listed twice");
      }
      kinds.push_back(k);
    } catch (const ConfigError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ConfigError(ConfigErrorCode::constraint, std::string("estimators: ") + e.what());
    }
  }
  return kinds;
}

// Applies OPE_LAB_SEED, when set, on top of the file's base_seed.
inline void apply_environment_overrides(SweepConfig& config) {
  if (const char* seed = std::getenv("OPE_LAB_SEED"); seed != nullptr && *seed != '\0') {
    config.base_seed = detail::parse_unsigned("OPE_LAB_SEED", seed);
  }
}

inline SweepConfig parse_config_text(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(ConfigErrorCode::syntax, std::string("malformed config: ") + e.what());
  }

  SweepConfig c;
  using Setter = void (*)(SweepConfig&, const std::string&);
  static const std::map<std::string, std::map<std::string, Setter>> schema = {
      {"sweep",
       {{"action_space_grid", [](SweepConfig& c, const std::string& v) { c.action_space_grid = parse_grid(v); }},
        {"n_samples",
         [](SweepConfig& c, const std::string& v) { c.n_samples = detail::parse_unsigned("n_samples", v); }},
        {"n_replications",
         [](SweepConfig& c, const std::string& v) {
           c.n_replications = detail::parse_unsigned("n_replications", v);
         }},
        {"estimators", [](SweepConfig& c, const std::string& v) { c.estimators = parse_estimator_list(v); }},
        {"base_seed", [](SweepConfig& c, const std::string& v) { c.base_seed = detail::parse_unsigned("base_seed", v); }},
        {"threads",
         [](SweepConfig& c, const std::string& v) {
           c.threads = static_cast<unsigned>(detail::parse_unsigned("threads", v));
         }}}},
      {"environment",
       {{"d_x", [](SweepConfig& c, const std::string& v) { c.d_x = detail::parse_unsigned("d_x", v); }},
        {"d_e", [](SweepConfig& c, const std::string& v) { c.d_e = detail::parse_unsigned("d_e", v); }},
        {"cardinalities",
         [](SweepConfig& c, const std::string& v) {
           c.cardinalities.clear();
           for (const std::string& item : detail::split_list(v)) {
             c.cardinalities.push_back(static_cast<int>(detail::parse_unsigned("cardinalities", item)));
           }
         }},
        {"beta", [](SweepConfig& c, const std::string& v) { c.beta = detail::parse_real("beta", v); }},
        {"epsilon", [](SweepConfig& c, const std::string& v) { c.epsilon = detail::parse_real("epsilon", v); }},
        {"reward_noise_sd",
         [](SweepConfig& c, const std::string& v) { c.reward_noise_sd = detail::parse_real("reward_noise_sd", v); }},
        {"direct_effect_strength",
         [](SweepConfig& c, const std::string& v) {
           c.direct_effect_strength = detail::parse_real("direct_effect_strength", v);
         }},
        {"pool_size", [](SweepConfig& c, const std::string& v) { c.pool_size = detail::parse_unsigned("pool_size", v); }},
        {"pool_sampling",
         [](SweepConfig& c, const std::string& v) {
           try {
             c.pool_sampling = pool_sampling_from_string(detail::trim(v));
           } catch (const ValidationError&) {
             throw detail::bad_value("pool_sampling", v, "'uniform' or 'cycle'");
           }
         }}}},
      {"model",
       {{"ridge_lambda",
         [](SweepConfig& c, const std::string& v) { c.ridge_lambda = detail::parse_real("ridge_lambda", v); }},
        {"action_onehot",
         [](SweepConfig& c, const std::string& v) { c.action_onehot = detail::parse_bool("action_onehot", v); }}}},
      {"oracle",
       {{"truth_samples",
         [](SweepConfig& c, const std::string& v) { c.truth_samples = detail::parse_unsigned("truth_samples", v); }}}},
      {"output", {{"directory", [](SweepConfig& c, const std::string& v) { c.output_directory = detail::trim(v); }}}},
  };

  for (const auto& [section, body] : tree) {
    const auto known = schema.find(section);
    if (known == schema.end() || !body.data().empty()) {
      throw ConfigError(ConfigErrorCode::constraint, "unknown config key or section '" + section + "'");
    }
    for (const auto& [key, value] : body) {
      const auto setter = known->second.find(key);
      if (setter == known->second.end()) {
        throw ConfigError(ConfigErrorCode::constraint, "unknown config key '" + section + "." + key + "'");
      }
      setter->second(c, value.data());
    }
  }

  apply_environment_overrides(c);
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const ValidationError& e) {
    throw ConfigError(ConfigErrorCode::constraint, e.what());
  }
  return c;
}

inline SweepConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(ConfigErrorCode::missing_file, "cannot open config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

// Inverse of parse_config_text; reals are written with enough digits to round-trip.
inline std::string serialize_config(const SweepConfig& c) {
  using detail::format_real;
  std::ostringstream out;
  out << "[sweep]\n"
      << "action_space_grid = " << detail::join(c.action_space_grid, [](std::size_t v) { return std::to_string(v); })
      << "\n"
      << "n_samples = " << c.n_samples << "\n"
      << "n_replications = " << c.n_replications << "\n"
      << "estimators = "
      << detail::join(c.estimators, [](EstimatorKind k) { return detail::lowercase(estimator_name(k)); }) << "\n"
      << "base_seed = " << c.base_seed << "\n"
      << "threads = " << c.threads << "\n\n"
      << "[environment]\n"
      << "d_x = " << c.d_x << "\n"
      << "d_e = " << c.d_e << "\n";
  if (!c.cardinalities.empty()) {
    out << "cardinalities = " << detail::join(c.cardinalities, [](int v) { return std::to_string(v); }) << "\n";
  }
  out << "beta = " << format_real(c.beta) << "\n"
      << "epsilon = " << format_real(c.epsilon) << "\n"
      << "reward_noise_sd = " << format_real(c.reward_noise_sd) << "\n"
      << "direct_effect_strength = " << format_real(c.direct_effect_strength) << "\n"
      << "pool_size = " << c.pool_size << "\n"
      << "pool_sampling = " << to_string(c.pool_sampling) << "\n\n"
      << "[model]\n"
      << "ridge_lambda = " << format_real(c.ridge_lambda) << "\n"
      << "action_onehot = " << (c.action_onehot ? "true" : "false") << "\n\n"
      << "[oracle]\n"
      << "truth_samples = " << c.truth_samples << "\n\n"
      << "[output]\n"
      << "directory = " << c.output_directory << "\n";
  return out.str();
}

struct ResultRow {
  std::string estimator;
  std::size_t n_actions = 0;
  std::size_t n_samples = 0;
  std::size_t n_replications = 0;
  double true_value = 0.0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double mse = 0.0;
  std::size_t failures = 0;
};

using ResultTable = std::vector<ResultRow>;

inline bool same_real(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

inline bool operator==(const ResultRow& a, const ResultRow& b) {
  return a.estimator == b.estimator && a.n_actions == b.n_actions && a.n_samples == b.n_samples &&
         a.n_replications == b.n_replications && same_real(a.true_value, b.true_value) &&
         same_real(a.mean_estimate, b.mean_estimate) && same_real(a.bias, b.bias) &&
         same_real(a.variance, b.variance) && same_real(a.mse, b.mse) && a.failures == b.failures;
}

// Seeds for one grid cell. Each |A| gets its own environment and replication
// stream, so adding a grid point never perturbs the others.
inline std::uint64_t cell_env_seed(std::uint64_t base_seed, std::size_t n_actions) {
  return mix_seed(base_seed, 2 * static_cast<std::uint64_t>(n_actions));
}
inline std::uint64_t cell_replication_seed(std::uint64_t base_seed, std::size_t n_actions) {
  return mix_seed(base_seed, 2 * static_cast<std::uint64_t>(n_actions) + 1);
}

inline VisitationExpectation cell_truth_mode(const SweepConfig& config, std::size_t n_actions) {
  if (config.pool_size > 0) return VisitationExpectation::pool_exact();
  return VisitationExpectation::monte_carlo(config.truth_samples, cell_env_seed(config.base_seed, n_actions));
}

inline OracleValue cell_true_value(const SweepConfig& config, std::size_t n_actions) {
  const Environment env = init_env(config.env_config(n_actions), cell_env_seed(config.base_seed, n_actions));
  return true_value(env, cell_truth_mode(config, n_actions));
}

inline ResultTable run_sweep(const SweepConfig& config, std::ostream* progress = nullptr) {
  config.validate();
  std::vector<EstimatorKind> kinds = config.estimators;
  std::sort(kinds.begin(), kinds.end(),
            [](EstimatorKind a, EstimatorKind b) { return estimator_name(a) < estimator_name(b); });
  const std::vector<EstimatorSpec> specs = standard_estimators(kinds);

  ResultTable table;
  for (std::size_t cell = 0; cell < config.action_space_grid.size(); ++cell) {
    const std::size_t n_actions = config.action_space_grid[cell];
    if (progress) {
      *progress << "[" << (cell + 1) << "/" << config.action_space_grid.size() << "] |A|=" << n_actions << " ..."
                << std::flush;
    }
    try {
      const Environment env = init_env(config.env_config(n_actions), cell_env_seed(config.base_seed, n_actions));
      MonteCarloOptions options;
      options.qhat = QhatSource::refit(FeatureConfig{config.action_onehot}, config.ridge_lambda);
      options.truth = cell_truth_mode(config, n_actions);
      options.threads = config.threads;
      options.keep_estimates = false;
      const EvalReport report = monte_carlo_eval(env, specs, config.n_samples, config.n_replications,
                                                 cell_replication_seed(config.base_seed, n_actions), options);
      for (const EstimatorSummary& s : report.estimators) {
        table.push_back({s.name, n_actions, config.n_samples, config.n_replications, report.true_value,
                         s.mean_estimate, s.bias, s.variance, s.mse, s.failures});
      }
      if (progress) *progress << " V=" << detail::format_real(report.true_value) << "\n";
    } catch (const Error& e) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      for (const EstimatorSpec& spec : specs) {
        table.push_back({spec.name, n_actions, config.n_samples, config.n_replications, nan, nan, nan, nan, nan,
                         config.n_replications});
      }
      if (progress) *progress << " failed: " << e.what() << "\n";
    }
  }
  return table;
}

inline constexpr const char* kResultsHeader =
    "estimator,n_actions,n_samples,n_replications,true_value,mean_estimate,bias,variance,mse,failures";

inline std::string results_csv(const ResultTable& table) {
  using detail::format_real;
  std::string out = std::string(kResultsHeader) + "\n";
  for (const ResultRow& r : table) {
    out += r.estimator + "," + std::to_string(r.n_actions) + "," + std::to_string(r.n_samples) + "," +
           std::to_string(r.n_replications) + "," + format_real(r.true_value) + "," + format_real(r.mean_estimate) +
           "," + format_real(r.bias) + "," + format_real(r.variance) + "," + format_real(r.mse) + "," +
           std::to_string(r.failures) + "\n";
  }
  return out;
}

inline ResultTable parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kResultsHeader) {
    throw ValidationError("results csv: missing or unexpected header");
  }
  auto real = [](const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw ValidationError("results csv: bad number '" + s + "'");
    return v;
  };
  auto count = [](const std::string& s) {
    return static_cast<std::size_t>(detail::parse_unsigned("results csv", s));
  };
  ResultTable table;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream fields(detail::trim(line));
    std::string item;
    while (std::getline(fields, item, ',')) f.push_back(item);
    if (f.size() != 10) throw ValidationError("results csv: expected 10 fields in '" + line + "'");
    table.push_back({f[0], count(f[1]), count(f[2]), count(f[3]), real(f[4]), real(f[5]), real(f[6]), real(f[7]),
                     real(f[8]), count(f[9])});
  }
  return table;
}

inline ResultTable read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_results_csv(buf.str());
}

// Estimators ranked by MSE within each grid cell.
inline std::string summary_text(const ResultTable& table) {
  std::map<std::size_t, std::vector<const ResultRow*>> cells;
  for (const ResultRow& r : table) cells[r.n_actions].push_back(&r);
  std::ostringstream out;
  for (auto& [n_actions, rows] : cells) {
    std::stable_sort(rows.begin(), rows.end(), [](const ResultRow* a, const ResultRow* b) {
      if (std::isnan(a->mse)) return false;
      if (std::isnan(b->mse)) return true;
      return a->mse < b->mse;
    });
    out << "|A| = " << n_actions << "  (n = " << rows.front()->n_samples << ", R = " << rows.front()->n_replications
        << ", V = " << std::setprecision(6) << rows.front()->true_value << ")\n";
    int rank = 1;
    for (const ResultRow* r : rows) {
      out << "  " << rank++ << ". " << std::left << std::setw(5) << r->estimator << std::right
          << "  mse=" << std::scientific << std::setprecision(4) << r->mse << "  bias=" << r->bias
          << "  variance=" << r->variance << std::defaultfloat;
      if (r->failures) out << "  failures=" << r->failures;
      out << "\n";
    }
    out << "\n";
  }
  return out.str();
}

namespace detail {

inline std::string estimator_colour(const std::string& name) {
  static const std::map<std::string, std::string> colours = {
      {"DM", "#7f7f7f"}, {"IPS", "#1f77b4"}, {"DR", "#2ca02c"}, {"MIPS", "#ff7f0e"}, {"MDR", "#d62728"}};
  const auto it = colours.find(name);
  return it == colours.end() ? "#000000" : it->second;
}

inline std::string svg_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace detail

// Log-log line chart of one metric against |A|. Points that cannot be placed
// on a log axis (zero, negative or NaN) are left out of their polyline.
inline std::string render_svg_chart(const ResultTable& table, const std::string& title, const std::string& y_label,
                                    double (*metric)(const ResultRow&)) {
  constexpr double width = 640, height = 440;
  constexpr double left = 80, right = 130, top = 40, bottom = 60;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  std::vector<std::string> order;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  std::set<std::size_t> grid;
  double y_min = INFINITY, y_max = -INFINITY;
  for (const ResultRow& r : table) {
    if (!series.count(r.estimator)) order.push_back(r.estimator);
    auto& pts = series[r.estimator];
    grid.insert(r.n_actions);
    const double y = metric(r);
    if (std::isfinite(y) && y > 0.0 && r.n_actions > 0) {
      pts.emplace_back(static_cast<double>(r.n_actions), y);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  if (!std::isfinite(y_min)) y_min = y_max = 1.0;

  double lx0 = std::log10(static_cast<double>(*grid.begin()));
  double lx1 = std::log10(static_cast<double>(*grid.rbegin()));
  if (lx1 - lx0 < 1e-9) {
    lx0 -= 0.5;
    lx1 += 0.5;
  }
  double ly0 = std::floor(std::log10(y_min));
  double ly1 = std::ceil(std::log10(y_max));
  if (ly1 - ly0 < 1.0) ly1 = ly0 + 1.0;
  const double pad = 0.04 * (lx1 - lx0);
  lx0 -= pad;
  lx1 += pad;

  auto px = [&](double x) { return left + (std::log10(x) - lx0) / (lx1 - lx0) * plot_w; };
  auto py = [&](double y) { return top + (ly1 - std::log10(y)) / (ly1 - ly0) * plot_h; };
  using detail::svg_number;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << svg_number(left + plot_w / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << title << "</text>\n"
      << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << svg_number(plot_w) << "\" height=\""
      << svg_number(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";

  svg << "<g class=\"x-ticks\">\n";
  for (std::size_t a : grid) {
    const double x = px(static_cast<double>(a));
    svg << "<line x1=\"" << svg_number(x) << "\" y1=\"" << svg_number(top + plot_h) << "\" x2=\"" << svg_number(x)
        << "\" y2=\"" << svg_number(top + plot_h + 5) << "\" stroke=\"black\"/>"
        << "<text x=\"" << svg_number(x) << "\" y=\"" << svg_number(top + plot_h + 18)
        << "\" text-anchor=\"middle\">" << a << "</text>\n";
  }
  svg << "</g>\n<g class=\"y-ticks\">\n";
  for (double d = ly0; d <= ly1 + 1e-9; d += 1.0) {
    const double y = py(std::pow(10.0, d));
    svg << "<line x1=\"" << svg_number(left - 5) << "\" y1=\"" << svg_number(y) << "\" x2=\"" << svg_number(left)
        << "\" y2=\"" << svg_number(y) << "\" stroke=\"black\"/>"
        << "<line x1=\"" << svg_number(left) << "\" y1=\"" << svg_number(y) << "\" x2=\""
        << svg_number(left + plot_w) << "\" y2=\"" << svg_number(y) << "\" stroke=\"#dddddd\"/>"
        << "<text x=\"" << svg_number(left - 8) << "\" y=\"" << svg_number(y + 4) << "\" text-anchor=\"end\">1e"
        << static_cast<int>(d) << "</text>\n";
  }
  svg << "</g>\n"
      << "<text x=\"" << svg_number(left + plot_w / 2) << "\" y=\"" << svg_number(height - 15)
      << "\" text-anchor=\"middle\">number of actions |A|</text>\n"
      << "<text transform=\"translate(20," << svg_number(top + plot_h / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << y_label << "</text>\n";

  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::string& name = order[i];
    const std::string colour = detail::estimator_colour(name);
    svg << "<polyline class=\"series\" data-estimator=\"" << name << "\" fill=\"none\" stroke=\"" << colour
        << "\" stroke-width=\"2\" points=\"";
    const auto& pts = series[name];
    for (std::size_t p = 0; p < pts.size(); ++p) {
      if (p) svg << " ";
      svg << svg_number(px(pts[p].first)) << "," << svg_number(py(pts[p].second));
    }
    svg << "\"/>\n";
    for (const auto& [x, y] : pts) {
      svg << "<circle cx=\"" << svg_number(px(x)) << "\" cy=\"" << svg_number(py(y)) << "\" r=\"3\" fill=\""
          << colour << "\"/>\n";
    }
    const double ly = top + 10 + 20 * static_cast<double>(i);
    svg << "<line x1=\"" << svg_number(left + plot_w + 15) << "\" y1=\"" << svg_number(ly) << "\" x2=\""
        << svg_number(left + plot_w + 40) << "\" y2=\"" << svg_number(ly) << "\" stroke=\"" << colour
        << "\" stroke-width=\"2\"/><text x=\"" << svg_number(left + plot_w + 46) << "\" y=\"" << svg_number(ly + 4)
        << "\">" << name << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

struct ReportPaths {
  std::filesystem::path csv, summary, mse_svg, bias_svg, variance_svg;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  out.close();
  if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

inline ReportPaths emit_report(const ResultTable& table, const std::filesystem::path& output_dir) {
  if (table.empty()) throw ValidationError("cannot emit a report for an empty result table");
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + output_dir.string() + "': " + ec.message());

  ReportPaths paths{output_dir / "results.csv", output_dir / "summary.txt", output_dir / "mse.svg",
                    output_dir / "bias.svg", output_dir / "variance.svg"};
  write_text_file(paths.csv, results_csv(table));
  write_text_file(paths.summary, summary_text(table));
  write_text_file(paths.mse_svg,
                  render_svg_chart(table, "MSE", "mean squared error", [](const ResultRow& r) { return r.mse; }));
  write_text_file(paths.bias_svg, render_svg_chart(table, "Bias", "|bias|",
                                                   [](const ResultRow& r) { return std::fabs(r.bias); }));
  write_text_file(paths.variance_svg, render_svg_chart(table, "Variance", "variance",
                                                       [](const ResultRow& r) { return r.variance; }));
  return paths;
}

}  // namespace ope_lab

#endif  // OPE_LAB_EXPERIMENT_HPP
