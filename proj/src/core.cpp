#include "pairlab/core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "pairlab/error.hpp"

namespace pairlab {

Vector l2_normalize(const Vector& v) {
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw DegenerateEmbedding();
  return v / norm;
}

void l2_normalize_rows(Matrix& rows) {
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const double norm = rows.row(r).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw DegenerateEmbedding();
    rows.row(r) /= norm;
  }
}

Matrix similarity_matrix(const Matrix& anchors, const Matrix& candidates) {
  if (anchors.cols() != candidates.cols()) {
    throw std::invalid_argument("similarity_matrix: dimension mismatch (" +
                                std::to_string(anchors.cols()) + " vs " +
                                std::to_string(candidates.cols()) + ")");
  }
  Matrix sim = anchors * candidates.transpose();
  // rounding can push unit dot products a hair outside [-1, 1]
  return sim.cwiseMax(-1.0).cwiseMin(1.0);
}

PairPartition partition_pairs(std::span<const Label> anchor_labels,
                              std::span<const Label> candidate_labels,
                              bool exclude_self) {
  if (exclude_self && anchor_labels.size() > candidate_labels.size()) {
    throw std::invalid_argument("partition_pairs: self-exclusion needs every anchor among the candidates");
  }
  PairPartition out;
  out.num_candidates = candidate_labels.size();
  out.anchors.resize(anchor_labels.size());
  for (std::size_t i = 0; i < anchor_labels.size(); ++i) {
    auto& a = out.anchors[i];
    if (exclude_self) a.self_index = i;
    for (std::size_t j = 0; j < candidate_labels.size(); ++j) {
      if (exclude_self && j == i) continue;
      (candidate_labels[j] == anchor_labels[i] ? a.positives : a.negatives).push_back(j);
    }
  }
  return out;
}

Matrix stack_rows(std::span<const LabeledEmbedding> embeddings) {
  if (embeddings.empty()) return Matrix(0, 0);
  const auto dim = embeddings.front().vector.size();
  Matrix out(static_cast<Eigen::Index>(embeddings.size()), dim);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (embeddings[i].vector.size() != dim) {
      throw std::invalid_argument("stack_rows: embeddings differ in dimension");
    }
    out.row(static_cast<Eigen::Index>(i)) = embeddings[i].vector.transpose();
  }
  return out;
}

}  // namespace pairlab

namespace pairlab {

std::size_t UniformBins::index(double value) const {
  if (value <= lo) return 0;
  if (value >= hi) return count - 1;
  const auto bin = static_cast<std::size_t>((value - lo) / width());
  return bin < count ? bin : count - 1;
}

void UniformBins::validate() const {
  if (count == 0 || !(hi > lo)) throw std::invalid_argument("bins: need count > 0 and hi > lo");
}

}  // namespace pairlab
