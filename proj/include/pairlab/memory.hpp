#pragma once

// Embedding memory with a momentum encoder. momentum = 0 keeps the memory
// encoder equal to the main encoder (cross-batch memory); momentum close to 1
// gives a slowly moving memory encoder.

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "pairlab/core.hpp"
#include "pairlab/encoder.hpp"
#include "pairlab/ring_buffer.hpp"

namespace pairlab {

/// target <- momentum * target + (1 - momentum) * source, elementwise.
/// Throws std::invalid_argument on a shape mismatch or momentum outside [0, 1].
void momentum_update(LayerStack& target, const LayerStack& source, double momentum);

struct MinedPairs {
  Matrix similarity;   // anchors x memory entries
  PairPartition partition;
  Matrix candidates;   // memory embeddings, oldest first
};

class MemoryBank {
 public:
  MemoryBank(std::size_t capacity, double momentum, MlpEncoderParams momentum_params);

  std::size_t capacity() const { return queue_.capacity(); }
  std::size_t size() const { return queue_.size(); }
  bool empty() const { return queue_.empty(); }
  double momentum() const { return momentum_; }
  const MlpEncoderParams& momentum_params() const { return momentum_params_; }
  const RingBuffer<LabeledEmbedding>& queue() const { return queue_; }

  void momentum_update(const MlpEncoderParams& main_params);

  /// Encodes `inputs` with the momentum encoder and appends them, evicting the oldest entries.
  void enqueue_batch(const Matrix& inputs, std::span<const Label> labels);

  /// Appends already-encoded unit rows.
  void enqueue_embeddings(const Matrix& embeddings, std::span<const Label> labels);

  /// Similarities of every anchor against every memory entry, split by label.
  /// Throws std::logic_error("memory not warmed up") on an empty memory.
  MinedPairs mine_pairs(const Matrix& anchors, std::span<const Label> anchor_labels) const;

  Matrix embeddings() const;
  std::vector<Label> labels() const;

 private:
  RingBuffer<LabeledEmbedding> queue_;
  double momentum_;
  MlpEncoderParams momentum_params_;
};

/// Mean squared Euclidean distance between the probe embeddings under two snapshots.
double feature_drift(const Matrix& probe_inputs, const MlpEncoderParams& a, const MlpEncoderParams& b);

/// Fixed probe inputs plus their embeddings at recorded iterations.
class DriftProbe {
 public:
  explicit DriftProbe(Matrix inputs);

  const Matrix& inputs() const { return inputs_; }
  void record(std::size_t iteration, const MlpEncoderParams& params);
  bool has(std::size_t iteration) const { return snapshots_.contains(iteration); }
  /// Mean squared distance between two recorded snapshots.
  double drift(std::size_t from, std::size_t to) const;

 private:
  Matrix inputs_;
  std::map<std::size_t, Matrix> snapshots_;
};

/// Number of negative pairs with similarity strictly above `threshold`.
std::size_t hard_negative_count(const Matrix& sim, const PairPartition& partition, double threshold);

}  // namespace pairlab
