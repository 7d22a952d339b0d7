#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pairlab/data.hpp"
#include "pairlab/encoder.hpp"
#include "pairlab/eval.hpp"
#include "pairlab/weighting.hpp"

namespace pairlab {

enum class TrainMode { MiniBatch, Memory };

struct AdamSettings {
  double learning_rate = 1e-3;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  TrainMode mode = TrainMode::Memory;
  /// Memory-encoder momentum; 0 reproduces cross-batch memory.
  double momentum = 0.999;
  /// Memory capacity in samples; 0 selects 16 x batch size.
  std::size_t memory_size = 0;
  /// Memory mode: also pair anchors with each other (self excluded).
  bool in_batch_pairs = false;
  /// Memory mode: enqueue the main-encoder embeddings instead of re-encoding with the memory encoder.
  bool enqueue_main_embeddings = false;

  WeightScheme scheme;
  std::size_t classes_per_batch = 8;
  std::size_t samples_per_class = 4;
  std::size_t iterations = 2000;
  AdamSettings adam;
  /// Divide the learning rate by 10 at 50% and 80% of the iterations.
  bool lr_step_decay = false;

  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden_dims{64};
  std::size_t embedding_dim = 8;

  std::size_t drift_interval = 100;  // 0 disables drift probing
  std::size_t probe_size = 256;
  double hard_negative_threshold = 0.5;
  std::vector<std::size_t> recall_ks{1, 2, 4, 8};
  std::size_t eval_interval = 0;  // 0: evaluate after the last iteration only

  std::size_t batch_size() const { return classes_per_batch * samples_per_class; }
  std::size_t resolved_memory_size() const { return memory_size ? memory_size : 16 * batch_size(); }
  std::vector<std::size_t> layer_dims(std::size_t input_dim) const;
  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

struct IterationRecord {
  std::size_t iteration = 0;  // 1-based step index
  double loss = 0.0;
  std::size_t hard_negatives = 0;
  std::optional<double> drift;  // set every drift_interval steps

  bool operator==(const IterationRecord&) const = default;
};

struct EvaluationRecord {
  std::size_t iteration = 0;
  RecallTable recall;

  bool operator==(const EvaluationRecord&) const = default;
};

struct RunRecord {
  std::vector<IterationRecord> iterations;
  std::vector<EvaluationRecord> evaluations;

  bool operator==(const RunRecord&) const = default;

  double mean_loss() const;
  /// Mean hard-negative count over steps in [first, last].
  double mean_hard_negatives(std::size_t first = 1, std::size_t last = SIZE_MAX) const;
  /// Mean of the recorded drift values at steps in [first, last].
  double mean_drift(std::size_t first = 1, std::size_t last = SIZE_MAX) const;
};

struct TrainResult {
  MlpEncoderParams params;
  std::optional<MlpEncoderParams> memory_params;
  RunRecord record;
};

struct Batch {
  std::vector<std::size_t> indices;
  Matrix inputs;
  std::vector<Label> labels;
};

/// P distinct classes, K distinct samples from each. Throws std::invalid_argument
/// when the dataset has fewer than P classes or a chosen class has fewer than K samples.
Batch sample_batch(const VectorDataset& dataset, std::size_t classes, std::size_t per_class, std::mt19937_64& rng);

struct AdamState {
  ParamGradient first_moment;
  ParamGradient second_moment;
  std::size_t step = 0;

  static AdamState for_params(const LayerStack& params);
};

/// One bias-corrected Adam update with weight decay added to the gradient.
/// Throws TrainingDiverged on a non-finite gradient.
void adam_step(MlpEncoderParams& params, const ParamGradient& grads, AdamState& state, const AdamSettings& settings,
               double learning_rate);

/// Independent stream `stream` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Runs the configured training loop. Evaluates on `test_set` when given.
/// Throws TrainingDiverged (with the iteration index) on a non-finite loss.
TrainResult train(const TrainConfig& config, const VectorDataset& train_set, const VectorDataset* test_set = nullptr);
TrainResult train(const TrainConfig& config, const VectorDataset& train_set, const VectorDataset* test_set,
                  MlpEncoderParams initial);

RecallTable evaluate_encoder(const MlpEncoderParams& params, const VectorDataset& dataset,
                             std::span<const std::size_t> ks);

// ---- grids ----

/// Sets a named hyperparameter. Scheme parameters (alpha, beta, lambda, tau,
/// a, b, margin) apply to every half that has them; others: momentum, lr,
/// weight_decay, memory_size, iterations, seed.
/// Throws std::invalid_argument on an unknown name or a parameter the scheme lacks.
void apply_parameter(TrainConfig& config, const std::string& name, double value);

struct GridAxis {
  std::string name;
  std::vector<double> values;
};

enum class GridStatus { Ok, Collapsed, Invalid };

struct GridRow {
  std::vector<std::pair<std::string, double>> point;
  GridStatus status = GridStatus::Ok;
  double recall_at_1 = 0.0;
  double final_loss = 0.0;
  double mean_drift = 0.0;
  double mean_hard_negatives = 0.0;
  std::string message;
};

const char* to_string(GridStatus status);

/// Collapse threshold: twice the chance Recall@1 of the test split.
double collapse_threshold(const VectorDataset& test_set);

/// Cartesian product of the axes, first axis slowest. Each point is trained
/// independently from the base seed; up to `jobs` points run concurrently.
std::vector<GridRow> grid_run(const TrainConfig& base, const std::vector<GridAxis>& axes,
                              const VectorDataset& train_set, const VectorDataset& test_set, std::size_t jobs = 1);

}  // namespace pairlab
