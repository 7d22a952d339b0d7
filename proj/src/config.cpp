#include "pairlab/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pairlab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ConfigError("config key '" + key + "': expected a real number, got '" + text + "'");
  }
  return v;
}

std::uint64_t to_count(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + text + "'");
}

std::vector<std::size_t> to_count_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  if (trim(text).empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_count(key, trim(item)));
  return out;
}

}  // namespace

WeightScheme make_scheme(const std::string& pos, const std::string& neg, const SchemeParams& p) {
  WeightScheme s;
  if (pos == "contrastive") {
    s.positive = ContrastivePositive{};
  } else if (pos == "binomial") {
    s.positive = BinomialPositive{p.alpha, p.lambda};
  } else if (pos == "ms") {
    s.positive = MsPositive{p.alpha, p.lambda};
  } else if (pos == "infonce") {
    s.positive = InfoNcePositive{p.tau};
  } else if (pos == "constant" || pos == "hll") {
    s.positive = ConstantPositive{};
  } else {
    throw ConfigError("unknown positive weighting '" + pos + "'");
  }

  if (neg == "contrastive") {
    s.negative = ContrastiveNegative{p.lambda};
  } else if (neg == "binomial") {
    s.negative = BinomialNegative{p.beta, p.lambda};
  } else if (neg == "ms") {
    s.negative = MsNegative{p.beta, p.lambda};
  } else if (neg == "infonce") {
    s.negative = InfoNceNegative{p.tau};
  } else if (neg == "hll") {
    s.negative = HllNegative{p.a, p.b};
  } else if (neg == "easy-binomial") {
    s.negative = SplitNegative{SplitNegative::Side::EasyBinomial, p.lambda, p.beta};
  } else if (neg == "hard-binomial") {
    s.negative = SplitNegative{SplitNegative::Side::HardBinomial, p.lambda, p.beta};
  } else {
    throw ConfigError("unknown negative weighting '" + neg + "'");
  }
  return s;
}

const ConfigValues& default_config_values() {
  static const ConfigValues defaults{
      // training mode and memory
      {"mode", "memory"},
      {"momentum", "0.999"},
      {"memory_size", "0"},
      {"in_batch_pairs", "false"},
      {"enqueue_main_embeddings", "false"},
      // weighting
      {"pos", "contrastive"},
      {"neg", "contrastive"},
      {"alpha", "2"},
      {"beta", "50"},
      {"lambda", "0.5"},
      {"tau", "0.1"},
      {"a", "0.5"},
      {"b", "0.5"},
      // optimization
      {"classes_per_batch", "8"},
      {"samples_per_class", "4"},
      {"iterations", "2000"},
      {"lr", "0.001"},
      {"weight_decay", "0.0005"},
      {"adam_beta1", "0.9"},
      {"adam_beta2", "0.999"},
      {"adam_epsilon", "1e-08"},
      {"lr_step_decay", "false"},
      {"seed", "0"},
      {"hidden_dims", "64"},
      {"embedding_dim", "8"},
      // diagnostics
      {"drift_interval", "100"},
      {"probe_size", "256"},
      {"hard_negative_threshold", "0.5"},
      {"recall_ks", "1,2,4,8"},
      {"eval_interval", "0"},
      // data
      {"data_path", ""},
      {"num_classes", "16"},
      {"per_class", "64"},
      {"input_dim", "16"},
      {"center_scale", "1"},
      {"noise_sigma", "0.25"},
      {"data_seed", "1"},
      {"train_fraction", "0.5"},
      {"split_seed", "1"},
  };
  return defaults;
}

ConfigValues parse_config_text(const std::string& text, const std::string& origin) {
  ConfigValues out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto where = origin + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!out.emplace(key, value).second) throw ConfigError(where + ": duplicate key '" + key + "'");
  }
  return out;
}

ConfigValues read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

ExperimentConfig resolve_config(const ConfigValues& file_values, const ConfigValues& overrides) {
  ExperimentConfig cfg;
  cfg.values = default_config_values();
  for (const auto* layer : {&file_values, &overrides}) {
    for (const auto& [key, value] : *layer) {
      auto it = cfg.values.find(key);
      if (it == cfg.values.end()) throw ConfigError("unknown config key '" + key + "'");
      it->second = value;
    }
  }
  const auto& v = cfg.values;
  auto real = [&](const char* k) { return to_real(k, v.at(k)); };
  auto count = [&](const char* k) { return static_cast<std::size_t>(to_count(k, v.at(k))); };
  auto flag = [&](const char* k) { return to_bool(k, v.at(k)); };

  auto& t = cfg.train;
  const auto& mode = v.at("mode");
  if (mode == "memory") {
    t.mode = TrainMode::Memory;
  } else if (mode == "minibatch") {
    t.mode = TrainMode::MiniBatch;
  } else {
    throw ConfigError("config key 'mode': expected memory or minibatch, got '" + mode + "'");
  }
  t.momentum = real("momentum");
  t.memory_size = count("memory_size");
  t.in_batch_pairs = flag("in_batch_pairs");
  t.enqueue_main_embeddings = flag("enqueue_main_embeddings");
  SchemeParams sp{real("alpha"), real("beta"), real("lambda"), real("tau"), real("a"), real("b")};
  t.scheme = make_scheme(v.at("pos"), v.at("neg"), sp);
  t.classes_per_batch = count("classes_per_batch");
  t.samples_per_class = count("samples_per_class");
  t.iterations = count("iterations");
  t.adam.learning_rate = real("lr");
  t.adam.weight_decay = real("weight_decay");
  t.adam.beta1 = real("adam_beta1");
  t.adam.beta2 = real("adam_beta2");
  t.adam.epsilon = real("adam_epsilon");
  t.lr_step_decay = flag("lr_step_decay");
  t.seed = to_count("seed", v.at("seed"));
  t.hidden_dims = to_count_list("hidden_dims", v.at("hidden_dims"));
  t.embedding_dim = count("embedding_dim");
  t.drift_interval = count("drift_interval");
  t.probe_size = count("probe_size");
  t.hard_negative_threshold = real("hard_negative_threshold");
  t.recall_ks = to_count_list("recall_ks", v.at("recall_ks"));
  t.eval_interval = count("eval_interval");

  auto& d = cfg.data;
  d.data_path = v.at("data_path");
  d.clusters.num_classes = count("num_classes");
  d.clusters.per_class = count("per_class");
  d.clusters.input_dim = count("input_dim");
  d.clusters.center_scale = real("center_scale");
  d.clusters.noise_sigma = real("noise_sigma");
  d.clusters.seed = to_count("data_seed", v.at("data_seed"));
  d.train_fraction = real("train_fraction");
  d.split_seed = to_count("split_seed", v.at("split_seed"));
  return cfg;
}

std::string describe_config(const ConfigValues& values) {
  std::string out;
  for (const auto& [key, value] : values) {
    if (!out.empty()) out += ' ';
    out += key + "=" + value;
  }
  return out;
}

std::pair<VectorDataset, VectorDataset> load_experiment_data(const DatasetConfig& config) {
  if (!config.data_path.empty()) {
    const std::filesystem::path path(config.data_path);
    if (!std::filesystem::exists(path)) throw std::runtime_error("dataset file not found: " + path.string());
    return split_by_class(load_csv(path), config.train_fraction, config.split_seed);
  }
  return split_by_class(generate_clusters(config.clusters), config.train_fraction, config.split_seed);
}

}  // namespace pairlab
