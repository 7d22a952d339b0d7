#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "pairlab/core.hpp"

namespace pairlab {

/// Raw input vectors with class labels. Immutable after construction.
class VectorDataset {
 public:
  /// Throws std::invalid_argument if counts differ, a label is negative, or a
  /// label has fewer than two samples.
  VectorDataset(Matrix inputs, std::vector<Label> labels);

  std::size_t size() const { return labels_.size(); }
  std::size_t input_dim() const { return static_cast<std::size_t>(inputs_.cols()); }
  std::size_t num_classes() const { return class_index_.size(); }

  const Matrix& inputs() const { return inputs_; }
  const std::vector<Label>& labels() const { return labels_; }
  const std::map<Label, std::vector<std::size_t>>& class_index() const { return class_index_; }
  std::vector<Label> class_labels() const;

  /// Rows at `indices`, in that order.
  Matrix gather(std::span<const std::size_t> indices) const;
  VectorDataset subset(std::span<const std::size_t> indices) const;

 private:
  Matrix inputs_;
  std::vector<Label> labels_;
  std::map<Label, std::vector<std::size_t>> class_index_;
};

struct ClusterSpec {
  std::size_t num_classes = 16;
  std::size_t per_class = 64;
  std::size_t input_dim = 16;
  double center_scale = 1.0;
  double noise_sigma = 0.25;
  std::uint64_t seed = 1;
};

/// Gaussian class centers N(0, center_scale^2 I), samples = center + N(0, noise_sigma^2 I).
/// Labels are 0..num_classes-1.
VectorDataset generate_clusters(const ClusterSpec& spec);

/// Partitions classes (not samples) into a train and a test side.
/// The train side gets round(num_classes * train_fraction) classes.
std::pair<VectorDataset, VectorDataset> split_by_class(const VectorDataset& dataset, double train_fraction,
                                                       std::uint64_t seed);

/// Rows of d_in reals followed by an integer label. An optional header row is
/// recognized by a non-numeric first token. Errors name the offending line.
VectorDataset load_csv(const std::filesystem::path& path);
void save_csv(const VectorDataset& dataset, const std::filesystem::path& path);

}  // namespace pairlab
