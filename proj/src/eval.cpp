#include "pairlab/eval.hpp"

#include <stdexcept>
#include <string>
#include <unordered_map>

namespace pairlab {

RecallTable recall_at_k(const Matrix& embeddings, std::span<const Label> labels, std::span<const std::size_t> ks) {
  const auto n = labels.size();
  if (static_cast<std::size_t>(embeddings.rows()) != n) {
    throw std::invalid_argument("recall_at_k: embedding and label counts differ");
  }
  if (n < 2) throw std::invalid_argument("recall_at_k: need at least two samples");
  std::unordered_map<Label, std::size_t> counts;
  for (auto l : labels) ++counts[l];
  for (const auto& [label, c] : counts) {
    if (c < 2) throw std::invalid_argument("recall_at_k: label " + std::to_string(label) + " has a single sample");
  }
  for (auto k : ks) {
    if (k == 0) throw std::invalid_argument("recall_at_k: K must be positive");
  }

  const Matrix sim = embeddings * embeddings.transpose();
  // rank of the best same-label candidate for each query
  std::vector<std::size_t> first_hit(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    std::size_t best = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || labels[j] != labels[i]) continue;
      if (best == n || sim(r, static_cast<Eigen::Index>(j)) > sim(r, static_cast<Eigen::Index>(best))) best = j;
    }
    const double s_best = sim(r, static_cast<Eigen::Index>(best));
    std::size_t rank = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || j == best) continue;
      const double s = sim(r, static_cast<Eigen::Index>(j));
      if (s > s_best || (s == s_best && j < best)) ++rank;
    }
    first_hit[i] = rank;
  }

  RecallTable out;
  for (auto k : ks) {
    std::size_t hits = 0;
    for (auto rank : first_hit) hits += rank < k ? 1 : 0;
    out[k] = static_cast<double>(hits) / static_cast<double>(n);
  }
  return out;
}

SimilarityHistograms similarity_distributions(const Matrix& embeddings, std::span<const Label> labels,
                                              const UniformBins& bins) {
  bins.validate();
  if (static_cast<std::size_t>(embeddings.rows()) != labels.size()) {
    throw std::invalid_argument("similarity_distributions: embedding and label counts differ");
  }
  SimilarityHistograms h{bins, std::vector<std::size_t>(bins.count, 0), std::vector<std::size_t>(bins.count, 0)};
  const Matrix sim = embeddings * embeddings.transpose();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      const auto bin = bins.index(sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      ++(labels[i] == labels[j] ? h.positive : h.negative)[bin];
    }
  }
  return h;
}

RetrievalResult evaluate_retrieval(const Matrix& embeddings, std::span<const Label> labels,
                                   std::span<const std::size_t> ks, const UniformBins& bins) {
  return {recall_at_k(embeddings, labels, ks), similarity_distributions(embeddings, labels, bins)};
}

}  // namespace pairlab
