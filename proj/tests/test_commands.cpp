#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pairlab/commands.hpp"
#include "pairlab/config.hpp"

using namespace pairlab;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "pairlab_cmd_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    rows.push_back(fields);
  }
  return rows;
}

ExperimentConfig quick(ConfigValues extra = {}) {
  ConfigValues v{{"iterations", "30"}, {"per_class", "16"}, {"hidden_dims", "16"}, {"drift_interval", "10"},
                 {"probe_size", "32"}};
  for (const auto& [k, x] : extra) v[k] = x;
  return resolve_config({}, v);
}

}  // namespace

TEST_CASE("config text") {
  const auto v = parse_config_text("# comment\n momentum = 0.9  # trailing\n\nneg=hll\n");
  CHECK(v.at("momentum") == "0.9");
  CHECK(v.at("neg") == "hll");
  CHECK_THROWS_WITH_AS(parse_config_text("a = 1\nno equals\n", "f.cfg"), doctest::Contains("f.cfg:2"),
                       ConfigError);
  CHECK_THROWS_AS(parse_config_text("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(" = 2\n"), ConfigError);
}

TEST_CASE("resolve_config") {
  const auto d = resolve_config({});
  CHECK(d.train.mode == TrainMode::Memory);
  CHECK(d.train.momentum == 0.999);
  CHECK(d.train.iterations == 2000);
  CHECK(d.data.clusters.num_classes == 16);
  CHECK(d.values.size() == default_config_values().size());

  const auto o = resolve_config({{"momentum", "0.5"}, {"pos", "binomial"}}, {{"momentum", "0"}, {"alpha", "3"}});
  CHECK(o.train.momentum == 0.0);
  CHECK(std::get<BinomialPositive>(o.train.scheme.positive).alpha == 3.0);
  CHECK(o.values.at("momentum") == "0");

  CHECK_THROWS_AS(resolve_config({{"gamma", "1"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"momentum", "fast"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"iterations", "-3"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"mode", "hybrid"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"pos", "triplet"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"in_batch_pairs", "maybe"}}), ConfigError);
  CHECK(resolve_config({{"hidden_dims", "32, 16"}}).train.hidden_dims == std::vector<std::size_t>{32, 16});
  CHECK(resolve_config({{"hidden_dims", ""}}).train.hidden_dims.empty());

  const auto file = scratch("cfg.txt");
  std::ofstream(file) << "neg = hll\na = 0.3\nb = 0.7\n";
  const auto f = resolve_config(read_config_file(file));
  CHECK(std::get<HllNegative>(f.train.scheme.negative).b == 0.7);
  CHECK_THROWS_AS(read_config_file(scratch("missing.cfg")), ConfigError);
  CHECK(describe_config({{"b", "2"}, {"a", "1"}}) == "a=1 b=2");
}

TEST_CASE("make_scheme names") {
  const SchemeParams p;
  CHECK(std::holds_alternative<ConstantPositive>(make_scheme("hll", "hll", p).positive));
  CHECK(std::holds_alternative<SplitNegative>(make_scheme("contrastive", "hard-binomial", p).negative));
  CHECK(std::holds_alternative<MsNegative>(make_scheme("ms", "ms", p).negative));
  CHECK_THROWS_AS(make_scheme("contrastive", "lifted", p), ConfigError);
}

TEST_CASE("cmd_curves") {
  SUBCASE("contrastive negative indicator") {
    auto cfg = resolve_config({}, {{"neg", "contrastive"}, {"lambda", "0.5"}});
    std::ostringstream out;
    CHECK(cmd_curves(cfg, CurveGridSpec{}, {}, out) == kExitOk);
    const auto text = out.str();
    CHECK(text.rfind("# pairlab curves", 0) == 0);
    const auto rows = csv_rows(text);
    CHECK(rows[0] == std::vector<std::string>{"similarity", "w_pos", "w_neg"});
    REQUIRE(rows.size() == 202);
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const double s = std::stod(rows[r][0]);
      CHECK(std::stod(rows[r][2]) == (s >= 0.5 ? 1.0 : 0.0));
    }
  }
  SUBCASE("binomial positive at lambda") {
    auto cfg = resolve_config({}, {{"pos", "binomial"}, {"alpha", "2"}, {"lambda", "0.5"}});
    const auto path = scratch("curve.csv");
    CHECK(cmd_curves(cfg, CurveGridSpec{}, path, std::cout) == kExitOk);
    const auto rows = csv_rows(slurp(path));
    bool seen = false;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (std::stod(rows[r][0]) == 0.5) {
        CHECK(std::stod(rows[r][1]) == 0.5);
        seen = true;
      }
    }
    CHECK(seen);
    const auto first = slurp(path);
    cmd_curves(cfg, CurveGridSpec{}, path, std::cout);
    CHECK(slurp(path) == first);
  }
  SUBCASE("bad grid") {
    std::ostringstream out;
    CHECK_THROWS_AS(cmd_curves(resolve_config({}), CurveGridSpec{0.5, -0.5, 10, {}}, {}, out), ConfigError);
  }
}

TEST_CASE("cmd_train") {
  const auto dir = scratch("train_xbm");
  std::filesystem::remove_all(dir);
  std::ostringstream log;
  const int rc = cmd_train(quick({{"momentum", "0"}}), dir, log);
  CHECK((rc == kExitOk || rc == kExitCollapse));
  CHECK(log.str().find("mode: memory (XBM-equivalent)") != std::string::npos);
  for (const char* f : {"run.csv", "recall.csv", "summary.csv", "drift.csv", "hard_negatives.csv",
                        "distributions.csv", "contributions.csv", "params.bin"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  CHECK(csv_rows(slurp(dir / "run.csv")).size() == 31);
  CHECK(csv_rows(slurp(dir / "drift.csv")).size() == 4);
  CHECK(slurp(dir / "summary.csv").find("memory (XBM-equivalent)") != std::string::npos);
  CHECK(load_params(dir / "params.bin").dims() == std::vector<std::size_t>{16, 16, 8});

  SUBCASE("zero iterations") {
    std::ostringstream l;
    const auto d0 = scratch("train_zero");
    CHECK(cmd_train(quick({{"iterations", "0"}}), d0, l) == kExitOk);
    CHECK(csv_rows(slurp(d0 / "run.csv")).size() == 1);
  }
  SUBCASE("missing dataset") {
    std::ostringstream l;
    try {
      cmd_train(quick({{"data_path", "/nonexistent/points.csv"}}), scratch("train_missing"), l);
      FAIL("expected an error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("/nonexistent/points.csv") != std::string::npos);
    }
  }
  SUBCASE("labels") {
    CHECK(mode_label(quick({{"mode", "minibatch"}}).train) == "minibatch");
    CHECK(mode_label(quick({{"momentum", "0.999"}}).train) == "memory (momentum 0.999)");
  }
}

TEST_CASE("parse_axes") {
  const auto axes = parse_axes({"a=0.3,0.5", "momentum=0"});
  REQUIRE(axes.size() == 2);
  CHECK(axes[0].values == std::vector<double>{0.3, 0.5});
  CHECK_THROWS_AS(parse_axes({"a"}), ConfigError);
  CHECK_THROWS_AS(parse_axes({"a=0.3,x"}), ConfigError);
  CHECK_THROWS_AS(parse_axes({"a=inf"}), ConfigError);
  CHECK_THROWS_AS(parse_axes({"a=1", "a=2"}), ConfigError);
}

TEST_CASE("cmd_grid") {
  const auto cfg = quick({{"pos", "hll"}, {"neg", "hll"}});
  const auto path = scratch("grid.csv");
  std::ostringstream log;
  CHECK(cmd_grid(cfg, parse_axes({"a=0.3,0.5", "b=0.3,0.5"}), 2, path, log) == kExitOk);
  const auto rows = csv_rows(slurp(path));
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == std::vector<std::string>{"a", "b", "status", "recall_at_1", "final_loss", "mean_drift",
                                            "mean_hard_negatives"});
  CHECK(rows[3][0] == "0.5");
  CHECK(rows[3][1] == "0.3");
  CHECK(rows[3][2] == "invalid");
  CHECK_THROWS_AS(cmd_grid(cfg, parse_axes({"gamma=1"}), 1, path, log), ConfigError);
  CHECK_THROWS_AS(cmd_grid(cfg, parse_axes({"alpha=1"}), 1, path, log), ConfigError);
}

TEST_CASE("drift csv") {
  const auto cfg = quick();
  const auto [train, test] = load_experiment_data(cfg.data);
  const auto runs = run_drift_comparison(cfg, train);
  std::ostringstream out;
  write_drift_csv(out, runs, 10, "test");
  const auto rows = csv_rows(out.str());
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].size() == 7);
  CHECK(rows[1] == std::vector<std::string>{"0", "0", "0", "0", "0", "0", "0"});
  CHECK(rows[4][0] == "30");
  CHECK(runs.xbm.iterations.size() == 30);

  const auto path = scratch("drift.csv");
  std::ostringstream log;
  CHECK(cmd_drift(cfg, path, log) == kExitOk);
  const auto first = slurp(path);
  cmd_drift(cfg, path, log);
  CHECK(slurp(path) == first);
}
