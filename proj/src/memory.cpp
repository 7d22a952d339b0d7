#include "pairlab/memory.hpp"

#include <stdexcept>
#include <string>

namespace pairlab {

void momentum_update(LayerStack& target, const LayerStack& source, double momentum) {
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw std::invalid_argument("momentum must lie in [0, 1]");
  if (!target.same_shape(source)) throw std::invalid_argument("momentum_update: parameter shapes differ");
  const double keep = momentum;
  const double take = 1.0 - momentum;
  for (std::size_t k = 0; k < target.layers.size(); ++k) {
    auto& t = target.layers[k];
    const auto& s = source.layers[k];
    t.weight = keep * t.weight + take * s.weight;
    t.bias = keep * t.bias + take * s.bias;
  }
}

MemoryBank::MemoryBank(std::size_t capacity, double momentum, MlpEncoderParams momentum_params)
    : queue_(capacity), momentum_(momentum), momentum_params_(std::move(momentum_params)) {
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw std::invalid_argument("momentum must lie in [0, 1]");
}

void MemoryBank::momentum_update(const MlpEncoderParams& main_params) {
  pairlab::momentum_update(momentum_params_, main_params, momentum_);
}

void MemoryBank::enqueue_batch(const Matrix& inputs, std::span<const Label> labels) {
  if (static_cast<std::size_t>(inputs.cols()) != momentum_params_.input_dim()) {
    throw std::invalid_argument("enqueue_batch: input dimension " + std::to_string(inputs.cols()) +
                                " does not match encoder input " + std::to_string(momentum_params_.input_dim()));
  }
  enqueue_embeddings(encode(momentum_params_, inputs), labels);
}

void MemoryBank::enqueue_embeddings(const Matrix& embeddings, std::span<const Label> labels) {
  if (static_cast<std::size_t>(embeddings.rows()) != labels.size()) {
    throw std::invalid_argument("enqueue: embedding and label counts differ");
  }
  if (!queue_.empty() && queue_.oldest().vector.size() != embeddings.cols()) {
    throw std::invalid_argument("enqueue: embedding dimension differs from memory");
  }
  for (Eigen::Index r = 0; r < embeddings.rows(); ++r) {
    queue_.push({embeddings.row(r).transpose(), labels[static_cast<std::size_t>(r)]});
  }
}

Matrix MemoryBank::embeddings() const {
  if (queue_.empty()) return Matrix(0, static_cast<Eigen::Index>(momentum_params_.output_dim()));
  Matrix out(static_cast<Eigen::Index>(queue_.size()), queue_.oldest().vector.size());
  for (std::size_t i = 0; i < queue_.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = queue_[i].vector.transpose();
  return out;
}

std::vector<Label> MemoryBank::labels() const {
  std::vector<Label> out(queue_.size());
  for (std::size_t i = 0; i < queue_.size(); ++i) out[i] = queue_[i].label;
  return out;
}

MinedPairs MemoryBank::mine_pairs(const Matrix& anchors, std::span<const Label> anchor_labels) const {
  if (queue_.empty()) throw std::logic_error("memory not warmed up");
  if (static_cast<std::size_t>(anchors.rows()) != anchor_labels.size()) {
    throw std::invalid_argument("mine_pairs: anchor and label counts differ");
  }
  MinedPairs out;
  out.candidates = embeddings();
  out.similarity = similarity_matrix(anchors, out.candidates);
  const auto memory_labels = labels();
  out.partition = partition_pairs(anchor_labels, memory_labels, false);
  return out;
}

double feature_drift(const Matrix& probe_inputs, const MlpEncoderParams& a, const MlpEncoderParams& b) {
  if (probe_inputs.rows() == 0) throw std::invalid_argument("feature_drift: empty probe");
  const Matrix ea = encode(a, probe_inputs);
  const Matrix eb = encode(b, probe_inputs);
  return (ea - eb).rowwise().squaredNorm().mean();
}

DriftProbe::DriftProbe(Matrix inputs) : inputs_(std::move(inputs)) {
  if (inputs_.rows() == 0) throw std::invalid_argument("DriftProbe: empty probe");
}

void DriftProbe::record(std::size_t iteration, const MlpEncoderParams& params) {
  snapshots_[iteration] = encode(params, inputs_);
}

double DriftProbe::drift(std::size_t from, std::size_t to) const {
  const auto a = snapshots_.find(from);
  const auto b = snapshots_.find(to);
  if (a == snapshots_.end() || b == snapshots_.end()) {
    throw std::out_of_range("DriftProbe: no snapshot at iteration " +
                            std::to_string(a == snapshots_.end() ? from : to));
  }
  return (a->second - b->second).rowwise().squaredNorm().mean();
}

std::size_t hard_negative_count(const Matrix& sim, const PairPartition& partition, double threshold) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < partition.num_anchors(); ++i) {
    for (auto j : partition[i].negatives) {
      if (sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > threshold) ++count;
    }
  }
  return count;
}

}  // namespace pairlab
