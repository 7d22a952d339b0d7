#include <doctest.h>

#include <random>

#include "pairlab/memory.hpp"
#include "pairlab/ring_buffer.hpp"

using namespace pairlab;

TEST_CASE("ring buffer is FIFO") {
  RingBuffer<int> q(3);
  CHECK(q.empty());
  CHECK_FALSE(q.push(1).has_value());
  q.push(2);
  q.push(3);
  CHECK(q.full());
  const auto evicted = q.push(4);
  REQUIRE(evicted.has_value());
  CHECK(*evicted == 1);
  CHECK(q.oldest() == 2);
  CHECK(q.newest() == 4);
  CHECK(q[1] == 3);
  CHECK(q.pop() == 2);
  CHECK(q.size() == 2);
  q.clear();
  CHECK(q.empty());
  CHECK_THROWS_AS(q.pop(), std::out_of_range);
  CHECK_THROWS_AS(RingBuffer<int>(0), std::invalid_argument);
}

TEST_CASE("ring buffer keeps the last capacity items in order") {
  std::mt19937_64 rng(5);
  for (std::size_t cap : {1u, 2u, 7u, 16u}) {
    RingBuffer<int> q(cap);
    std::vector<int> all;
    for (int k = 0; k < 50; ++k) {
      const int v = static_cast<int>(rng() % 1000);
      q.push(v);
      all.push_back(v);
      const std::size_t n = std::min(all.size(), cap);
      REQUIRE(q.size() == n);
      for (std::size_t i = 0; i < n; ++i) CHECK(q[i] == all[all.size() - n + i]);
    }
  }
}

TEST_CASE("momentum update") {
  auto target = init_encoder({3, 4, 2}, 1);
  const auto source = init_encoder({3, 4, 2}, 2);
  const Vector t0 = flatten(target), s = flatten(source);

  auto copy = target;
  momentum_update(copy, source, 0.0);
  CHECK(flatten(copy) == s);

  copy = target;
  momentum_update(copy, source, 1.0);
  CHECK(flatten(copy) == t0);

  copy = target;
  momentum_update(copy, source, 0.9);
  CHECK((flatten(copy) - (0.9 * t0 + 0.1 * s)).norm() < 1e-14);
  // contraction toward the source
  CHECK((flatten(copy) - s).norm() == doctest::Approx(0.9 * (t0 - s).norm()));

  CHECK_THROWS_AS(momentum_update(copy, source, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(momentum_update(copy, init_encoder({3, 5, 2}, 1), 0.5), std::invalid_argument);
}

TEST_CASE("memory bank") {
  const auto params = init_encoder({3, 6, 2}, 3);
  MemoryBank bank(4, 0.5, params);
  CHECK(bank.empty());
  const Matrix anchor = encode(params, Matrix::Ones(1, 3));
  const std::vector<Label> al{0};
  CHECK_THROWS_WITH_AS(bank.mine_pairs(anchor, al), "memory not warmed up", std::logic_error);

  Matrix x(3, 3);
  x << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  const std::vector<Label> labels{0, 1, 0};
  bank.enqueue_batch(x, labels);
  CHECK(bank.size() == 3);
  CHECK(bank.embeddings() == encode(params, x));

  bank.enqueue_batch(x, labels);
  CHECK(bank.size() == 4);
  // oldest first: the first batch's last sample, then the whole second batch
  CHECK(bank.labels() == std::vector<Label>{0, 0, 1, 0});

  const auto mined = bank.mine_pairs(anchor, al);
  CHECK(mined.similarity.rows() == 1);
  CHECK(mined.similarity.cols() == 4);
  CHECK(mined.partition[0].positives == std::vector<std::size_t>{0, 1, 3});
  CHECK(mined.partition[0].negatives == std::vector<std::size_t>{2});
  CHECK_FALSE(mined.partition[0].self_index.has_value());

  const std::vector<Label> bad{0, 1};
  CHECK_THROWS_AS(bank.enqueue_batch(x, bad), std::invalid_argument);
  CHECK_THROWS_AS(bank.enqueue_batch(Matrix::Ones(1, 5), al), std::invalid_argument);
  CHECK_THROWS_AS(MemoryBank(4, -0.1, params), std::invalid_argument);
}

TEST_CASE("memory encoder follows the main encoder") {
  const auto main = init_encoder({3, 6, 2}, 4);
  MemoryBank xbm(8, 0.0, init_encoder({3, 6, 2}, 9));
  xbm.momentum_update(main);
  CHECK(flatten(xbm.momentum_params()) == flatten(main));

  MemoryBank smoco(8, 0.999, init_encoder({3, 6, 2}, 9));
  const double before = (flatten(smoco.momentum_params()) - flatten(main)).norm();
  smoco.momentum_update(main);
  const double after = (flatten(smoco.momentum_params()) - flatten(main)).norm();
  CHECK(after == doctest::Approx(0.999 * before));
}

TEST_CASE("feature drift") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  Matrix probe(20, 3);
  for (Eigen::Index k = 0; k < probe.size(); ++k) probe.data()[k] = g(rng);
  const auto a = init_encoder({3, 32, 2}, 1);
  const auto b = init_encoder({3, 32, 2}, 2);
  CHECK(feature_drift(probe, a, a) == 0.0);
  const double d = feature_drift(probe, a, b);
  CHECK(d > 0.0);
  CHECK(d == feature_drift(probe, b, a));
  CHECK(d <= 4.0);
  const Matrix ea = encode(a, probe), eb = encode(b, probe);
  CHECK(d == doctest::Approx((ea - eb).rowwise().squaredNorm().mean()));

  DriftProbe dp(probe);
  dp.record(0, a);
  dp.record(100, b);
  CHECK(dp.has(100));
  CHECK_FALSE(dp.has(50));
  CHECK(dp.drift(0, 100) == doctest::Approx(d));
  CHECK(dp.drift(0, 0) == 0.0);
  CHECK_THROWS_AS(dp.drift(0, 50), std::out_of_range);
  CHECK_THROWS_AS(feature_drift(Matrix(0, 3), a, b), std::invalid_argument);
}

TEST_CASE("hard negative count") {
  Matrix sim(2, 4);
  sim << 0.9, 0.6, 0.5, 0.2, 0.7, 0.51, 0.9, -0.3;
  const std::vector<Label> al{0, 1}, cl{0, 1, 1, 2};
  const auto part = partition_pairs(al, cl, false);
  // anchor 0 negatives: 0.6, 0.5, 0.2 -> one above 0.5; anchor 1 negatives: 0.7, -0.3 -> one
  CHECK(hard_negative_count(sim, part, 0.5) == 2);
  CHECK(hard_negative_count(sim, part, -1.0) == 5);
}
