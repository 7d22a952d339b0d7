#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pairlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Label = int;

/// A unit-norm embedding with its class id.
struct LabeledEmbedding {
  Vector vector;
  Label label = 0;
};

/// Positive and negative candidate indices for one anchor.
struct AnchorPairs {
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  std::optional<std::size_t> self_index;
};

/// Per-anchor split of the candidate columns of a similarity matrix.
struct PairPartition {
  std::vector<AnchorPairs> anchors;
  std::size_t num_candidates = 0;

  std::size_t num_anchors() const { return anchors.size(); }
  const AnchorPairs& operator[](std::size_t i) const { return anchors[i]; }
};

/// Returns v / |v|. Throws DegenerateEmbedding on a zero or non-finite norm.
Vector l2_normalize(const Vector& v);

/// Normalizes every row of `rows` in place.
void l2_normalize_rows(Matrix& rows);

/// Cosine similarity between unit rows: entry (i, j) = <anchor_i, candidate_j>.
/// Throws std::invalid_argument on a dimension mismatch.
Matrix similarity_matrix(const Matrix& anchors, const Matrix& candidates);

/// Splits candidates into positives (same label) and negatives per anchor.
/// With `exclude_self`, candidate i is dropped from anchor i's sets; this
/// requires the anchors and candidates to be the same collection.
PairPartition partition_pairs(std::span<const Label> anchor_labels,
                              std::span<const Label> candidate_labels,
                              bool exclude_self);

/// Stacks embeddings into a row matrix. All vectors must share one dimension.
Matrix stack_rows(std::span<const LabeledEmbedding> embeddings);

}  // namespace pairlab

namespace pairlab {

/// `count` equal-width bins over [lo, hi]; values on the upper edge land in the last bin.
struct UniformBins {
  double lo = -1.0;
  double hi = 1.0;
  std::size_t count = 80;

  double width() const { return (hi - lo) / static_cast<double>(count); }
  double lower_edge(std::size_t bin) const { return lo + width() * static_cast<double>(bin); }
  std::size_t index(double value) const;
  void validate() const;
};

}  // namespace pairlab
