// pairlab: weight curves, training runs, grid sweeps and drift comparisons.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include "pairlab/commands.hpp"
#include "pairlab/config.hpp"
#include "pairlab/error.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::string out;
  std::vector<std::string> sets;
  std::size_t jobs = 1;
  double grid_min = -1.0;
  double grid_max = 1.0;
  std::size_t grid_points = 201;
  double reference_positive = 0.0;
  double reference_negative = 0.0;
  std::vector<std::string> axes;
};

// Flags that map one-to-one onto config keys.
const std::vector<std::pair<std::string, std::string>> kKeyFlags{
    {"--seed", "seed"},   {"--pos", "pos"},   {"--neg", "neg"},     {"--alpha", "alpha"},
    {"--beta", "beta"},   {"--lambda", "lambda"}, {"--tau", "tau"}, {"--a", "a"},
    {"--b", "b"},         {"--mode", "mode"}, {"--momentum", "momentum"}, {"--memory-size", "memory_size"},
    {"--iterations", "iterations"}, {"--data", "data_path"},
};

void add_common(CLI::App* cmd, Flags& flags, std::map<std::string, std::string>& key_flags) {
  cmd->add_option("--config", flags.config_path, "key = value configuration file");
  cmd->add_option("--set", flags.sets, "override a config key (key=value), repeatable");
  for (const auto& [flag, key] : kKeyFlags) cmd->add_option(flag, key_flags[key], "sets config key '" + key + "'");
}

pairlab::ExperimentConfig build_config(const Flags& flags, const std::map<std::string, std::string>& key_flags) {
  pairlab::ConfigValues file_values;
  if (!flags.config_path.empty()) file_values = pairlab::read_config_file(flags.config_path);
  pairlab::ConfigValues overrides;
  for (const auto& s : flags.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw pairlab::ConfigError("--set expects key=value, got '" + s + "'");
    overrides[s.substr(0, eq)] = s.substr(eq + 1);
  }
  for (const auto& [key, value] : key_flags) {
    if (!value.empty()) overrides[key] = value;
  }
  auto config = pairlab::resolve_config(file_values, overrides);
  config.train.scheme.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pair-weighting metric learning experiments"};
  app.require_subcommand(1);
  Flags flags;
  std::map<std::string, std::string> key_flags;

  auto* curves = app.add_subcommand("curves", "positive/negative weight curves as CSV");
  add_common(curves, flags, key_flags);
  curves->add_option("--out", flags.out, "output CSV (default: stdout)");
  curves->add_option("--grid-min", flags.grid_min, "lowest similarity")->check(CLI::Range(-1.0, 1.0));
  curves->add_option("--grid-max", flags.grid_max, "highest similarity")->check(CLI::Range(-1.0, 1.0));
  curves->add_option("--grid-points", flags.grid_points, "number of grid points")->check(CLI::PositiveNumber);
  curves->add_option("--ref-pos", flags.reference_positive, "positive similarity seen by negative weights");
  curves->add_option("--ref-neg", flags.reference_negative, "negative similarity seen by positive weights");

  auto* train = app.add_subcommand("train", "train once and write run records");
  add_common(train, flags, key_flags);
  train->add_option("--out", flags.out, "output directory")->required();

  auto* grid = app.add_subcommand("grid", "hyperparameter sweep");
  add_common(grid, flags, key_flags);
  grid->add_option("--out", flags.out, "output CSV")->required();
  grid->add_option("--jobs", flags.jobs, "concurrent grid points")->check(CLI::PositiveNumber);
  grid->add_option("--axis,axes", flags.axes, "name=v1,v2,... (repeatable)")->required();

  auto* drift = app.add_subcommand("drift", "feature drift of mini-batch, XBM and momentum memory");
  add_common(drift, flags, key_flags);
  drift->add_option("--out", flags.out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? pairlab::kExitOk : pairlab::kExitUsage;
  }

  try {
    const auto config = build_config(flags, key_flags);
    if (*curves) {
      pairlab::CurveGridSpec spec{flags.grid_min, flags.grid_max, flags.grid_points, {}};
      spec.context.reference_positive = flags.reference_positive;
      spec.context.reference_negative = flags.reference_negative;
      return pairlab::cmd_curves(config, spec, flags.out, std::cout);
    }
    if (*train) return pairlab::cmd_train(config, flags.out, std::cout);
    if (*grid) return pairlab::cmd_grid(config, pairlab::parse_axes(flags.axes), flags.jobs, flags.out, std::cout);
    if (*drift) return pairlab::cmd_drift(config, flags.out, std::cout);
  } catch (const pairlab::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pairlab::kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pairlab::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pairlab::kExitRuntime;
  }
  return pairlab::kExitUsage;
}
