#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ope_lab/experiment.hpp"

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kRuntime = 2, kIo = 3 };

int exit_code_for(const ope_lab::ConfigError& e) {
  return e.code() == ope_lab::ConfigErrorCode::missing_file ? kIo : kValidation;
}

struct RunOverrides {
  std::string grid;
  std::optional<std::size_t> replications;
  std::optional<std::uint64_t> seed;
  std::string estimators;
};

ope_lab::SweepConfig apply(ope_lab::SweepConfig config, const RunOverrides& o) {
  using ope_lab::ConfigError;
  using ope_lab::ConfigErrorCode;
  if (!o.grid.empty()) config.action_space_grid = ope_lab::parse_grid(o.grid);
  if (o.replications) config.n_replications = *o.replications;
  if (o.seed) config.base_seed = *o.seed;
  if (!o.estimators.empty()) config.estimators = ope_lab::parse_estimator_list(o.estimators);
  try {
    config.validate();
  } catch (const ope_lab::ValidationError& e) {
    throw ConfigError(ConfigErrorCode::constraint, e.what());
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Off-policy estimator sweeps over synthetic bandits with action embeddings"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  RunOverrides overrides;

  CLI::App* run = app.add_subcommand("run", "Run the estimator sweep and write results.csv, summary.txt and plots");
  run->add_option("--config", config_path, "Sweep config file")->required();
  run->add_option("--out", out_dir, "Output directory (defaults to the config's [output] directory)");
  run->add_option("--grid", overrides.grid, "Comma separated action counts, e.g. 10,100,1000");
  run->add_option("--replications", overrides.replications, "Replications per grid cell");
  run->add_option("--seed", overrides.seed, "Base seed");
  run->add_option("--estimators", overrides.estimators, "Comma separated subset of dm,ips,dr,mips,mdr");

  CLI::App* validate = app.add_subcommand("validate", "Parse and check a config file");
  validate->add_option("--config", config_path, "Sweep config file")->required();

  CLI::App* oracle = app.add_subcommand("oracle", "Print the evaluation policy's true value for each grid cell");
  oracle->add_option("--config", config_path, "Sweep config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*validate) {
      const ope_lab::SweepConfig config = ope_lab::parse_config(config_path);
      std::cout << ope_lab::serialize_config(config);
      return kOk;
    }
    if (*oracle) {
      const ope_lab::SweepConfig config = ope_lab::parse_config(config_path);
      std::printf("n_actions,true_value,standard_error\n");
      for (std::size_t n_actions : config.action_space_grid) {
        const ope_lab::OracleValue v = ope_lab::cell_true_value(config, n_actions);
        std::printf("%zu,%s,%s\n", n_actions, ope_lab::detail::format_real(v.value).c_str(),
                    ope_lab::detail::format_real(v.standard_error).c_str());
      }
      return kOk;
    }
    const ope_lab::SweepConfig config = apply(ope_lab::parse_config(config_path), overrides);
    const std::string target = out_dir.empty() ? config.output_directory : out_dir;
    const ope_lab::ResultTable table = ope_lab::run_sweep(config, &std::cerr);
    const ope_lab::ReportPaths paths = ope_lab::emit_report(table, target);
    std::cerr << "wrote " << paths.csv.string() << "\n";
    std::cout << ope_lab::summary_text(table);
    return kOk;
  } catch (const ope_lab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const ope_lab::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const ope_lab::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}
