#pragma once

// Random fixtures shared by the unit tests and the acceptance binary.

#include <random>
#include <vector>

#include "oracles.hpp"
#include "pairlab/core.hpp"
#include "pairlab/weighting.hpp"

namespace support {

struct RandomContext {
  pairlab::Matrix sim;
  pairlab::PairPartition partition;
  oracle::Problem problem;
};

/// Anchors x candidates with similarities uniform in [-1, 1] and random labels.
/// Every anchor gets at least one positive and one negative.
inline RandomContext random_context(std::mt19937_64& rng, std::size_t max_anchors = 4,
                                    std::size_t max_candidates = 10) {
  std::uniform_int_distribution<std::size_t> na(1, max_anchors), nc(2, max_candidates);
  std::uniform_real_distribution<double> s(-1.0, 1.0);
  const std::size_t a = na(rng), c = nc(rng);
  RandomContext r;
  r.sim.resize(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c));
  for (Eigen::Index k = 0; k < r.sim.size(); ++k) r.sim.data()[k] = s(rng);

  std::bernoulli_distribution coin(0.4);
  std::vector<pairlab::Label> anchor_labels(a, 0), candidate_labels(c);
  for (std::size_t i = 0; i < a; ++i) anchor_labels[i] = static_cast<pairlab::Label>(i % 2);
  for (auto& l : candidate_labels) l = coin(rng) ? 0 : 2;
  // guarantee both pair types for every anchor label
  candidate_labels[0] = 0;
  candidate_labels[1] = 2;
  if (c > 2) candidate_labels[2] = 1;
  if (a > 1 && c <= 2) anchor_labels.assign(a, 0);
  r.partition = pairlab::partition_pairs(anchor_labels, candidate_labels, false);

  r.problem.sim.resize(a);
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      r.problem.sim[i].push_back(r.sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    r.problem.pos_idx.push_back(r.partition[i].positives);
    r.problem.neg_idx.push_back(r.partition[i].negatives);
  }
  return r;
}

inline oracle::Family oracle_family(pairlab::LossKind k) {
  switch (k) {
    case pairlab::LossKind::Contrastive: return oracle::Family::Contrastive;
    case pairlab::LossKind::Binomial: return oracle::Family::Binomial;
    case pairlab::LossKind::MultiSimilarity: return oracle::Family::MultiSimilarity;
    case pairlab::LossKind::InfoNce: return oracle::Family::InfoNce;
  }
  return oracle::Family::Contrastive;
}

inline oracle::Params oracle_params(const pairlab::LossFamily& f) {
  return {f.alpha, f.beta, f.lambda, f.tau};
}

/// Parameters drawn from the documented ranges.
inline pairlab::LossFamily random_family(pairlab::LossKind kind, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> alpha(0.5, 10.0), beta(1.0, 100.0), lambda(-0.5, 0.9), tau(0.05, 1.0);
  pairlab::LossFamily f;
  f.kind = kind;
  f.alpha = alpha(rng);
  f.beta = beta(rng);
  f.lambda = lambda(rng);
  f.tau = tau(rng);
  return f;
}

}  // namespace support
