#include "pairlab/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <variant>

#include "pairlab/error.hpp"
#include "pairlab/memory.hpp"

namespace pairlab {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSamplerStream = 2;
constexpr std::uint64_t kProbeStream = 3;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

// Anchor-vs-candidate pairs for memory mode, optionally extended with the
// anchors themselves as extra candidates (self excluded).
struct PairSource {
  Matrix candidates;
  Matrix similarity;
  PairPartition partition;
};

PairSource memory_pairs(const MemoryBank& bank, const Matrix& anchors, std::span<const Label> labels,
                        bool in_batch) {
  auto mined = bank.mine_pairs(anchors, labels);
  if (!in_batch) return {std::move(mined.candidates), std::move(mined.similarity), std::move(mined.partition)};

  const auto n_mem = mined.candidates.rows();
  const auto n_anchor = anchors.rows();
  PairSource out;
  out.candidates.resize(n_mem + n_anchor, anchors.cols());
  out.candidates << mined.candidates, anchors;
  out.similarity = similarity_matrix(anchors, out.candidates);
  out.partition = std::move(mined.partition);
  out.partition.num_candidates = static_cast<std::size_t>(n_mem + n_anchor);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& a = out.partition.anchors[i];
    const auto self = static_cast<std::size_t>(n_mem) + i;
    a.self_index = self;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (j == i) continue;
      (labels[j] == labels[i] ? a.positives : a.negatives).push_back(static_cast<std::size_t>(n_mem) + j);
    }
  }
  return out;
}

double scheduled_lr(const TrainConfig& config, std::size_t step) {
  double lr = config.adam.learning_rate;
  if (!config.lr_step_decay) return lr;
  const double progress = static_cast<double>(step - 1) / static_cast<double>(config.iterations);
  if (progress >= 0.5) lr *= 0.1;
  if (progress >= 0.8) lr *= 0.1;
  return lr;
}

}  // namespace

std::vector<std::size_t> TrainConfig::layer_dims(std::size_t input_dim) const {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(embedding_dim);
  return dims;
}

void TrainConfig::validate() const {
  scheme.validate();
  if (samples_per_class < 2) throw std::invalid_argument("samples_per_class must be >= 2");
  if (classes_per_batch < 1) throw std::invalid_argument("classes_per_batch must be >= 1");
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw std::invalid_argument("momentum must lie in [0, 1]");
  if (!(adam.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(adam.weight_decay >= 0.0)) throw std::invalid_argument("weight decay must be non-negative");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw std::invalid_argument("adam epsilon must be positive");
  if (embedding_dim < 2) throw std::invalid_argument("embedding_dim must be >= 2");
  for (auto h : hidden_dims) {
    if (h == 0) throw std::invalid_argument("hidden layer widths must be positive");
  }
  if (!(hard_negative_threshold >= -1.0 && hard_negative_threshold <= 1.0)) {
    throw std::invalid_argument("hard_negative_threshold must lie in [-1, 1]");
  }
  if (recall_ks.empty()) throw std::invalid_argument("recall_ks must not be empty");
  for (auto k : recall_ks) {
    if (k == 0) throw std::invalid_argument("recall K must be positive");
  }
}

double RunRecord::mean_loss() const {
  if (iterations.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : iterations) sum += r.loss;
  return sum / static_cast<double>(iterations.size());
}

double RunRecord::mean_hard_negatives(std::size_t first, std::size_t last) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : iterations) {
    if (r.iteration < first || r.iteration > last) continue;
    sum += static_cast<double>(r.hard_negatives);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double RunRecord::mean_drift(std::size_t first, std::size_t last) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : iterations) {
    if (!r.drift || r.iteration < first || r.iteration > last) continue;
    sum += *r.drift;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

Batch sample_batch(const VectorDataset& dataset, std::size_t classes, std::size_t per_class,
                   std::mt19937_64& rng) {
  const auto& index = dataset.class_index();
  if (classes == 0 || per_class == 0) throw std::invalid_argument("sample_batch: P and K must be positive");
  if (classes > index.size()) {
    throw std::invalid_argument("sample_batch: asked for " + std::to_string(classes) + " classes, dataset has " +
                                std::to_string(index.size()));
  }
  auto labels = dataset.class_labels();
  std::shuffle(labels.begin(), labels.end(), rng);
  labels.resize(classes);

  Batch batch;
  batch.indices.reserve(classes * per_class);
  for (auto label : labels) {
    auto members = index.at(label);
    if (members.size() < per_class) {
      throw std::invalid_argument("sample_batch: class " + std::to_string(label) + " has fewer than " +
                                  std::to_string(per_class) + " samples");
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < per_class; ++k) {
      batch.indices.push_back(members[k]);
      batch.labels.push_back(label);
    }
  }
  batch.inputs = dataset.gather(batch.indices);
  return batch;
}

AdamState AdamState::for_params(const LayerStack& params) {
  return {ParamGradient::zeros_like(params), ParamGradient::zeros_like(params), 0};
}

void adam_step(MlpEncoderParams& params, const ParamGradient& grads, AdamState& state, const AdamSettings& settings,
               double learning_rate) {
  if (!params.same_shape(grads) || !params.same_shape(state.first_moment)) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  if (!grads.all_finite()) throw TrainingDiverged("training diverged: non-finite gradient");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(settings.beta1, t);
  const double c2 = 1.0 - std::pow(settings.beta2, t);
  auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
    const auto g_wd = (g.array() + settings.weight_decay * theta.array()).eval();
    m.array() = settings.beta1 * m.array() + (1.0 - settings.beta1) * g_wd;
    v.array() = settings.beta2 * v.array() + (1.0 - settings.beta2) * g_wd.square();
    theta.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + settings.epsilon);
  };
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    update(params.layers[k].weight, grads.layers[k].weight, state.first_moment.layers[k].weight,
           state.second_moment.layers[k].weight);
    update(params.layers[k].bias, grads.layers[k].bias, state.first_moment.layers[k].bias,
           state.second_moment.layers[k].bias);
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RecallTable evaluate_encoder(const MlpEncoderParams& params, const VectorDataset& dataset,
                             std::span<const std::size_t> ks) {
  return recall_at_k(encode(params, dataset.inputs()), dataset.labels(), ks);
}

TrainResult train(const TrainConfig& config, const VectorDataset& train_set, const VectorDataset* test_set) {
  return train(config, train_set, test_set,
               init_encoder(config.layer_dims(train_set.input_dim()), derive_seed(config.seed, kInitStream)));
}

TrainResult train(const TrainConfig& config, const VectorDataset& train_set, const VectorDataset* test_set,
                  MlpEncoderParams initial) {
  config.validate();
  if (initial.input_dim() != train_set.input_dim()) {
    throw std::invalid_argument("train: encoder input dimension does not match the dataset");
  }
  TrainResult result{std::move(initial), std::nullopt, {}};
  auto& params = result.params;
  if (config.iterations == 0) return result;

  const bool memory_mode = config.mode == TrainMode::Memory;
  const std::size_t m = config.batch_size();
  std::mt19937_64 sampler(derive_seed(config.seed, kSamplerStream));
  std::optional<MemoryBank> bank;
  if (memory_mode) bank.emplace(config.resolved_memory_size(), config.momentum, params);
  AdamState adam = AdamState::for_params(params);

  std::optional<DriftProbe> probe;
  if (config.drift_interval > 0) {
    std::vector<std::size_t> all(train_set.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> chosen;
    std::mt19937_64 probe_rng(derive_seed(config.seed, kProbeStream));
    std::sample(all.begin(), all.end(), std::back_inserter(chosen), std::min(config.probe_size, all.size()),
                probe_rng);
    probe.emplace(train_set.gather(chosen));
    probe->record(0, params);
  }

  result.record.iterations.reserve(config.iterations);
  for (std::size_t step = 1; step <= config.iterations; ++step) {
    IterationRecord rec;
    rec.iteration = step;
    const Batch batch = sample_batch(train_set, config.classes_per_batch, config.samples_per_class, sampler);

    // encoder whose features are the pair candidates of this step
    const MlpEncoderParams* pair_encoder = &params;
    MlpEncoderParams pre_update;
    try {
      if (memory_mode) bank->momentum_update(params);
      const ForwardResult fwd = forward(params, batch.inputs);
      const Matrix& anchors = fwd.embeddings;

      Matrix weights, grad_embed;
      if (memory_mode) {
        if (config.enqueue_main_embeddings) {
          bank->enqueue_embeddings(anchors, batch.labels);
          pre_update = params;
        } else {
          bank->enqueue_batch(batch.inputs, batch.labels);
          pair_encoder = &bank->momentum_params();
        }
        const auto pairs = memory_pairs(*bank, anchors, batch.labels, config.in_batch_pairs);
        weights = weight_matrix(config.scheme, pairs.similarity, pairs.partition);
        rec.loss = surrogate_loss(weights, pairs.similarity, pairs.partition, m);
        rec.hard_negatives = hard_negative_count(pairs.similarity, pairs.partition, config.hard_negative_threshold);
        grad_embed = chain_pair_gradient(weights, pairs.partition, anchors, pairs.candidates, m);
      } else {
        pre_update = params;
        const Matrix sim = similarity_matrix(anchors, anchors);
        const auto partition = partition_pairs(batch.labels, batch.labels, true);
        weights = weight_matrix(config.scheme, sim, partition);
        rec.loss = surrogate_loss(weights, sim, partition, m);
        rec.hard_negatives = hard_negative_count(sim, partition, config.hard_negative_threshold);
        grad_embed = chain_pair_gradient_in_batch(weights, partition, anchors, m);
      }
      if (!std::isfinite(rec.loss)) {
        throw TrainingDiverged("training diverged: non-finite loss");
      }
      const ParamGradient grads = backward(params, fwd.cache, grad_embed);
      adam_step(params, grads, adam, config.adam, scheduled_lr(config, step));
    } catch (const DegenerateEmbedding&) {
      throw TrainingDiverged("training diverged: degenerate embedding (iteration " + std::to_string(step) + ")");
    } catch (const TrainingDiverged& e) {
      throw TrainingDiverged(std::string(e.what()) + " (iteration " + std::to_string(step) + ")");
    }
    if (pair_encoder == &params) pair_encoder = &pre_update;

    if (probe && step % config.drift_interval == 0) {
      probe->record(step, *pair_encoder);
      rec.drift = probe->drift(step - config.drift_interval, step);
    }
    result.record.iterations.push_back(rec);

    const bool last = step == config.iterations;
    const bool scheduled = config.eval_interval > 0 && step % config.eval_interval == 0;
    if (test_set && (last || scheduled)) {
      result.record.evaluations.push_back({step, evaluate_encoder(params, *test_set, config.recall_ks)});
    }
  }
  if (bank) result.memory_params = bank->momentum_params();
  return result;
}

void apply_parameter(TrainConfig& config, const std::string& name, double value) {
  if (name == "momentum") {
    config.momentum = value;
    return;
  }
  if (name == "lr") {
    config.adam.learning_rate = value;
    return;
  }
  if (name == "weight_decay") {
    config.adam.weight_decay = value;
    return;
  }
  auto as_count = [&](const char* what) {
    if (!(value >= 0.0) || value != std::floor(value)) {
      throw std::invalid_argument(std::string(what) + " must be a non-negative integer");
    }
    return static_cast<std::size_t>(value);
  };
  if (name == "memory_size") {
    config.memory_size = as_count("memory_size");
    return;
  }
  if (name == "iterations") {
    config.iterations = as_count("iterations");
    return;
  }
  if (name == "seed") {
    config.seed = as_count("seed");
    return;
  }

  bool used = false;
  auto set = [&](double& field) {
    field = value;
    used = true;
  };
  std::visit(overloaded{
                 [&](BinomialPositive& h) {
                   if (name == "alpha") set(h.alpha);
                   if (name == "lambda") set(h.lambda);
                 },
                 [&](MsPositive& h) {
                   if (name == "alpha") set(h.alpha);
                   if (name == "lambda") set(h.lambda);
                 },
                 [&](InfoNcePositive& h) {
                   if (name == "tau") set(h.tau);
                 },
                 [](auto&) {},
             },
             config.scheme.positive);
  std::visit(overloaded{
                 [&](ContrastiveNegative& h) {
                   if (name == "lambda") set(h.lambda);
                 },
                 [&](BinomialNegative& h) {
                   if (name == "beta") set(h.beta);
                   if (name == "lambda") set(h.lambda);
                 },
                 [&](MsNegative& h) {
                   if (name == "beta") set(h.beta);
                   if (name == "lambda") set(h.lambda);
                 },
                 [&](InfoNceNegative& h) {
                   if (name == "tau") set(h.tau);
                 },
                 [&](HllNegative& h) {
                   if (name == "a") set(h.a);
                   if (name == "b") set(h.b);
                 },
                 [&](SplitNegative& h) {
                   if (name == "beta") set(h.beta);
                   if (name == "margin" || name == "lambda") set(h.margin);
                 },
             },
             config.scheme.negative);
  if (!used) {
    throw std::invalid_argument("parameter '" + name + "' is not used by scheme " + config.scheme.describe());
  }
}

const char* to_string(GridStatus status) {
  switch (status) {
    case GridStatus::Ok:
      return "ok";
    case GridStatus::Collapsed:
      return "collapsed";
    case GridStatus::Invalid:
      return "invalid";
  }
  return "unknown";
}

double collapse_threshold(const VectorDataset& test_set) {
  return 2.0 / static_cast<double>(test_set.num_classes());
}

std::vector<GridRow> grid_run(const TrainConfig& base, const std::vector<GridAxis>& axes,
                              const VectorDataset& train_set, const VectorDataset& test_set, std::size_t jobs) {
  std::size_t total = 1;
  for (const auto& axis : axes) {
    if (axis.values.empty()) throw std::invalid_argument("grid axis '" + axis.name + "' has no values");
    for (double v : axis.values) {
      if (!std::isfinite(v)) throw std::invalid_argument("grid axis '" + axis.name + "' has a non-finite value");
    }
    total *= axis.values.size();
  }
  // unknown names fail up front rather than per point
  {
    TrainConfig probe_config = base;
    for (const auto& axis : axes) apply_parameter(probe_config, axis.name, axis.values.front());
  }

  std::vector<GridRow> rows(total);
  const double threshold = collapse_threshold(test_set);
  auto run_point = [&](std::size_t index) {
    GridRow& row = rows[index];
    TrainConfig config = base;
    std::size_t rem = index;
    for (std::size_t a = axes.size(); a-- > 0;) {
      const auto& axis = axes[a];
      const double v = axis.values[rem % axis.values.size()];
      rem /= axis.values.size();
      row.point.insert(row.point.begin(), {axis.name, v});
    }
    try {
      for (const auto& [name, v] : row.point) apply_parameter(config, name, v);
      config.validate();
    } catch (const std::invalid_argument& e) {
      row.status = GridStatus::Invalid;
      row.message = e.what();
      return;
    }
    try {
      const auto result = train(config, train_set, &test_set);
      row.recall_at_1 = evaluate_encoder(result.params, test_set, std::vector<std::size_t>{1}).at(1);
      if (!result.record.iterations.empty()) row.final_loss = result.record.iterations.back().loss;
      row.mean_drift = result.record.mean_drift();
      row.mean_hard_negatives = result.record.mean_hard_negatives();
      row.status = row.recall_at_1 < threshold ? GridStatus::Collapsed : GridStatus::Ok;
    } catch (const TrainingDiverged& e) {
      row.status = GridStatus::Collapsed;
      row.message = e.what();
    } catch (const std::exception& e) {
      row.status = GridStatus::Invalid;
      row.message = e.what();
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, total));
  if (workers == 1) {
    for (std::size_t i = 0; i < total; ++i) run_point(i);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < total; i = next++) run_point(i);
    });
  }
  pool.clear();
  return rows;
}

}  // namespace pairlab
