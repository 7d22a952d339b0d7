#include <doctest.h>

#include <set>

#include "pairlab/error.hpp"
#include "pairlab/trainer.hpp"

using namespace pairlab;

namespace {

struct Split {
  VectorDataset train;
  VectorDataset test;
};

const Split& small_split() {
  static const Split s = [] {
    ClusterSpec spec;
    spec.per_class = 16;
    auto [train, test] = split_by_class(generate_clusters(spec), 0.5, 1);
    return Split{std::move(train), std::move(test)};
  }();
  return s;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.iterations = 40;
  c.drift_interval = 10;
  c.probe_size = 32;
  c.hidden_dims = {16};
  return c;
}

}  // namespace

TEST_CASE("sample_batch") {
  const auto& d = small_split().train;
  std::mt19937_64 rng(1);
  const auto b = sample_batch(d, 2, 2, rng);
  CHECK(b.inputs.rows() == 4);
  std::map<Label, int> counts;
  for (auto l : b.labels) ++counts[l];
  CHECK(counts.size() == 2);
  for (const auto& [l, c] : counts) CHECK(c == 2);
  for (std::size_t i = 0; i < 4; ++i) CHECK(d.labels()[b.indices[i]] == b.labels[i]);

  std::mt19937_64 r1(5), r2(5);
  CHECK(sample_batch(d, 8, 4, r1).indices == sample_batch(d, 8, 4, r2).indices);

  std::mt19937_64 r3(9);
  const auto full = sample_batch(d, 8, 4, r3);
  CHECK(std::set<std::size_t>(full.indices.begin(), full.indices.end()).size() == 32);

  CHECK_THROWS_AS(sample_batch(d, 9, 2, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_batch(d, 2, 17, rng), std::invalid_argument);
}

TEST_CASE("adam_step") {
  auto params = init_encoder({3, 4, 2}, 1);
  const Vector before = flatten(params);
  AdamSettings s;
  s.weight_decay = 0.0;

  auto state = AdamState::for_params(params);
  adam_step(params, ParamGradient::zeros_like(params), state, s, 1e-3);
  CHECK(flatten(params) == before);

  // first step moves every coordinate by about lr against the gradient sign
  auto g = ParamGradient::zeros_like(params);
  Vector gflat = Vector::LinSpaced(static_cast<Eigen::Index>(params.num_parameters()), -2.0, 3.0);
  gflat[0] = 0.5;
  unflatten(g, gflat);
  auto fresh = AdamState::for_params(params);
  auto p2 = params;
  adam_step(p2, g, fresh, s, 1e-3);
  const Vector delta = flatten(p2) - before;
  for (Eigen::Index k = 0; k < delta.size(); ++k) {
    if (std::abs(gflat[k]) < 1e-6) continue;
    CHECK(delta[k] == doctest::Approx(-1e-3 * (gflat[k] > 0 ? 1.0 : -1.0)).epsilon(1e-4));
  }

  auto bad = ParamGradient::zeros_like(params);
  bad.layers[0].weight(0, 0) = std::nan("");
  CHECK_THROWS_AS(adam_step(params, bad, state, s, 1e-3), TrainingDiverged);
  CHECK_THROWS_WITH(adam_step(params, bad, state, s, 1e-3), doctest::Contains("training diverged"));

  SUBCASE("weight decay enters the gradient") {
    AdamSettings wd;
    wd.weight_decay = 0.1;
    auto p = params;
    auto st = AdamState::for_params(p);
    adam_step(p, ParamGradient::zeros_like(p), st, wd, 1e-3);
    const Vector d = flatten(p) - flatten(params);
    const Vector theta = flatten(params);
    for (Eigen::Index k = 0; k < d.size(); ++k) {
      if (theta[k] != 0.0) CHECK(d[k] * theta[k] < 0.0);
    }
  }
}

TEST_CASE("derive_seed separates streams") {
  CHECK(derive_seed(0, 1) != derive_seed(0, 2));
  CHECK(derive_seed(0, 1) != derive_seed(1, 1));
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(TrainConfig{}.validate());
  TrainConfig c;
  CHECK(c.batch_size() == 32);
  CHECK(c.resolved_memory_size() == 512);
  c.samples_per_class = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.momentum = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.scheme.negative = HllNegative{0.6, 0.2};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  CHECK(c.layer_dims(16) == std::vector<std::size_t>{16, 64, 8});
}

TEST_CASE("training runs are deterministic") {
  const auto& s = small_split();
  for (auto mode : {TrainMode::MiniBatch, TrainMode::Memory}) {
    auto c = quick_config();
    c.mode = mode;
    const auto a = train(c, s.train, &s.test);
    const auto b = train(c, s.train, &s.test);
    CHECK(a.record == b.record);
    CHECK(flatten(a.params) == flatten(b.params));
    CHECK(a.record.iterations.size() == 40);
    for (std::size_t i = 0; i < 40; ++i) {
      CHECK(a.record.iterations[i].iteration == i + 1);
      CHECK(std::isfinite(a.record.iterations[i].loss));
      CHECK(a.record.iterations[i].drift.has_value() == ((i + 1) % 10 == 0));
    }
    REQUIRE(a.record.evaluations.size() == 1);
    CHECK(a.record.evaluations[0].iteration == 40);
    auto other = c;
    other.seed = 1;
    CHECK_FALSE(train(other, s.train).record == a.record);
  }
}

TEST_CASE("zero iterations returns the initial encoder") {
  const auto& s = small_split();
  auto c = quick_config();
  c.iterations = 0;
  const auto init = init_encoder(c.layer_dims(16), 3);
  const auto r = train(c, s.train, &s.test, init);
  CHECK(flatten(r.params) == flatten(init));
  CHECK(r.record.iterations.empty());
  CHECK(r.record.evaluations.empty());
}

TEST_CASE("memory and mini-batch differ from the first step") {
  const auto& s = small_split();
  auto c = quick_config();
  c.iterations = 1;
  c.momentum = 0.0;
  const auto mem = train(c, s.train);
  c.mode = TrainMode::MiniBatch;
  const auto mb = train(c, s.train);
  CHECK(mem.record.iterations[0].loss != mb.record.iterations[0].loss);
}

TEST_CASE("momentum zero equals enqueueing main embeddings") {
  const auto& s = small_split();
  auto c = quick_config();
  c.momentum = 0.0;
  const auto a = train(c, s.train, &s.test);
  c.enqueue_main_embeddings = true;
  const auto b = train(c, s.train, &s.test);
  CHECK(a.record == b.record);
  CHECK(flatten(a.params) == flatten(b.params));
}

TEST_CASE("memory encoder changes only through the momentum update") {
  const auto& s = small_split();
  auto c = quick_config();
  c.momentum = 1.0;
  const auto init = init_encoder(c.layer_dims(16), 11);
  const auto r = train(c, s.train, nullptr, init);
  REQUIRE(r.memory_params.has_value());
  CHECK(flatten(*r.memory_params) == flatten(init));
  CHECK(flatten(r.params) != flatten(init));
}

TEST_CASE("in-batch pairs and step decay run") {
  const auto& s = small_split();
  auto c = quick_config();
  c.in_batch_pairs = true;
  c.lr_step_decay = true;
  c.eval_interval = 20;
  const auto r = train(c, s.train, &s.test);
  CHECK(r.record.evaluations.size() == 2);
  CHECK(r.record.evaluations[0].iteration == 20);
  c.in_batch_pairs = false;
  CHECK_FALSE(train(c, s.train, &s.test).record == r.record);
}

TEST_CASE("run record summaries") {
  RunRecord r;
  r.iterations = {{1, 2.0, 4, std::nullopt}, {2, 4.0, 6, 0.5}, {3, 6.0, 8, std::nullopt}, {4, 0.0, 2, 1.5}};
  CHECK(r.mean_loss() == 3.0);
  CHECK(r.mean_hard_negatives() == 5.0);
  CHECK(r.mean_hard_negatives(2, 3) == 7.0);
  CHECK(r.mean_drift() == 1.0);
  CHECK(r.mean_drift(3) == 1.5);
  CHECK(RunRecord{}.mean_drift() == 0.0);
}

TEST_CASE("apply_parameter") {
  TrainConfig c;
  apply_parameter(c, "momentum", 0.5);
  CHECK(c.momentum == 0.5);
  apply_parameter(c, "lambda", 0.3);
  CHECK(std::get<ContrastiveNegative>(c.scheme.negative).lambda == 0.3);
  CHECK_THROWS_AS(apply_parameter(c, "alpha", 2.0), std::invalid_argument);
  CHECK_THROWS_AS(apply_parameter(c, "nonsense", 2.0), std::invalid_argument);
  CHECK_THROWS_AS(apply_parameter(c, "iterations", 2.5), std::invalid_argument);
  c.scheme = WeightScheme{BinomialPositive{}, HllNegative{0.3, 0.5}};
  apply_parameter(c, "a", 0.1);
  apply_parameter(c, "alpha", 4.0);
  CHECK(std::get<HllNegative>(c.scheme.negative).a == 0.1);
  CHECK(std::get<BinomialPositive>(c.scheme.positive).alpha == 4.0);
}

TEST_CASE("grid_run") {
  const auto& s = small_split();
  auto base = quick_config();
  base.scheme = WeightScheme{ConstantPositive{}, HllNegative{0.5, 0.5}};

  SUBCASE("HLL grid marks a > b invalid") {
    const std::vector<GridAxis> axes{{"a", {0.3, 0.5}}, {"b", {0.3, 0.5}}};
    const auto rows = grid_run(base, axes, s.train, s.test, 2);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].point == std::vector<std::pair<std::string, double>>{{"a", 0.3}, {"b", 0.3}});
    CHECK(rows[1].point[1].second == 0.5);
    CHECK(rows[2].point[0].second == 0.5);
    CHECK(rows[2].point[1].second == 0.3);
    CHECK(rows[2].status == GridStatus::Invalid);
    for (std::size_t i : {0u, 1u, 3u}) CHECK(rows[i].status != GridStatus::Invalid);
  }
  SUBCASE("single point equals train") {
    const std::vector<GridAxis> axes{{"momentum", {0.9}}};
    const auto rows = grid_run(base, axes, s.train, s.test);
    auto c = base;
    c.momentum = 0.9;
    const auto r = train(c, s.train, &s.test);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].recall_at_1 == r.record.evaluations.back().recall.at(1));
    CHECK(rows[0].final_loss == r.record.iterations.back().loss);
    CHECK(rows[0].mean_drift == r.record.mean_drift());
  }
  SUBCASE("parallel and serial agree") {
    const std::vector<GridAxis> axes{{"momentum", {0.0, 0.5, 0.9, 0.999}}};
    const auto serial = grid_run(base, axes, s.train, s.test, 1);
    const auto parallel = grid_run(base, axes, s.train, s.test, 3);
    REQUIRE(serial.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(serial[i].recall_at_1 == parallel[i].recall_at_1);
      CHECK(serial[i].final_loss == parallel[i].final_loss);
    }
  }
  SUBCASE("unknown axis") {
    const std::vector<GridAxis> axes{{"gamma", {1.0}}};
    CHECK_THROWS_AS(grid_run(base, axes, s.train, s.test), std::invalid_argument);
  }
  CHECK(collapse_threshold(s.test) == doctest::Approx(0.25));
  CHECK(std::string(to_string(GridStatus::Collapsed)) == "collapsed");
}
