#pragma once

// Flat `key = value` experiment configuration. Every key has a default;
// unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>

#include "pairlab/data.hpp"
#include "pairlab/trainer.hpp"
#include "pairlab/weighting.hpp"

namespace pairlab {

/// Raised for malformed or unknown configuration entries.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using ConfigValues = std::map<std::string, std::string>;

struct DatasetConfig {
  std::string data_path;  // empty: synthetic clusters
  ClusterSpec clusters;
  double train_fraction = 0.5;
  std::uint64_t split_seed = 1;
};

struct ExperimentConfig {
  TrainConfig train;
  DatasetConfig data;
  ConfigValues values;  // fully resolved key/value view
};

struct SchemeParams {
  double alpha = 2.0;
  double beta = 50.0;
  double lambda = 0.5;
  double tau = 0.1;
  double a = 0.5;
  double b = 0.5;
};

/// pos: contrastive | binomial | ms | infonce | constant
/// neg: contrastive | binomial | ms | infonce | hll | easy-binomial | hard-binomial
/// Throws ConfigError on an unknown name; parameters are not range-checked here.
WeightScheme make_scheme(const std::string& pos, const std::string& neg, const SchemeParams& params);

/// Defaults for every recognized key.
const ConfigValues& default_config_values();

/// Parses `key = value` lines; '#' starts a comment. Throws ConfigError with
/// the line number on malformed lines or duplicate keys.
ConfigValues parse_config_text(const std::string& text, const std::string& origin = "<config>");
ConfigValues read_config_file(const std::filesystem::path& path);

/// Merges `overrides` over `file_values` over the defaults and converts.
/// Throws ConfigError on unknown keys or unparsable values.
ExperimentConfig resolve_config(const ConfigValues& file_values, const ConfigValues& overrides = {});

/// "key=value key=value ..." over the resolved values, sorted by key.
std::string describe_config(const ConfigValues& values);

/// Loads or generates the dataset and splits it by class into (train, test).
std::pair<VectorDataset, VectorDataset> load_experiment_data(const DatasetConfig& config);

}  // namespace pairlab
