#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "pairlab/core.hpp"

namespace pairlab {

using RecallTable = std::map<std::size_t, double>;

/// Fraction of queries whose K most similar other samples contain a same-label
/// sample. Ties in similarity rank the lower candidate index first.
/// Throws std::invalid_argument on K = 0, fewer than two samples, or a label
/// that occurs only once.
RecallTable recall_at_k(const Matrix& embeddings, std::span<const Label> labels, std::span<const std::size_t> ks);

struct SimilarityHistograms {
  UniformBins bins;
  std::vector<std::size_t> positive;
  std::vector<std::size_t> negative;
};

/// Counts of unordered same-label and different-label pair similarities.
SimilarityHistograms similarity_distributions(const Matrix& embeddings, std::span<const Label> labels,
                                              const UniformBins& bins = {});

struct RetrievalResult {
  RecallTable recall_at;
  SimilarityHistograms distributions;
};

RetrievalResult evaluate_retrieval(const Matrix& embeddings, std::span<const Label> labels,
                                   std::span<const std::size_t> ks, const UniformBins& bins = {});

}  // namespace pairlab
