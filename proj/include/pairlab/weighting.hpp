#pragma once

// Pair weighting: every pair-based loss is reduced to a nonnegative weight
// magnitude per pair, with polarity given by the pair type. The loss gradient
// w.r.t. a similarity S_ij is -w_ij/m for positives and +w_ij/m for negatives.

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pairlab/core.hpp"

namespace pairlab {

// ---- positive halves ----

/// Constant weight 1 (contrastive loss).
struct ContrastivePositive {};
/// sigmoid(alpha * (lambda - S)).
struct BinomialPositive {
  double alpha = 2.0;
  double lambda = 0.5;
};
/// exp(alpha (lambda - S_ij)) / (1 + sum_{k in P_i} exp(alpha (lambda - S_ik))).
struct MsPositive {
  double alpha = 2.0;
  double lambda = 0.5;
};
/// (1/tau) * (1 - softmax of S_ij against the anchor's negatives).
struct InfoNcePositive {
  double tau = 0.1;
};
/// Constant weight 1 (hinge-like loss). Same curve as ContrastivePositive.
struct ConstantPositive {};

using PositiveHalf =
    std::variant<ContrastivePositive, BinomialPositive, MsPositive, InfoNcePositive, ConstantPositive>;

// ---- negative halves ----

/// Indicator S >= lambda.
struct ContrastiveNegative {
  double lambda = 0.5;
};
/// sigmoid(beta * (S - lambda)).
struct BinomialNegative {
  double beta = 50.0;
  double lambda = 0.5;
};
/// exp(beta (S_ij - lambda)) / (1 + sum_{k in N_i} exp(beta (S_ik - lambda))).
struct MsNegative {
  double beta = 50.0;
  double lambda = 0.5;
};
/// (1/tau) * sum_{p in P_i} exp(S_ij/tau) / (exp(S_ip/tau) + sum_{n in N_i} exp(S_in/tau)).
struct InfoNceNegative {
  double tau = 0.1;
};
/// 0 below a, 1 at or above b, linear in between. a == b is a step at a.
struct HllNegative {
  double a = 0.5;
  double b = 0.5;
};
/// Negatives split at a similarity margin into easy (S < margin) and hard ones.
/// EasyBinomial: easy get sigmoid(beta (S - margin)), hard get 1.
/// HardBinomial: easy get 0, hard get sigmoid(beta (S - margin)).
struct SplitNegative {
  enum class Side { EasyBinomial, HardBinomial };
  Side side = Side::EasyBinomial;
  double margin = 0.5;
  double beta = 50.0;
};

using NegativeHalf = std::variant<ContrastiveNegative, BinomialNegative, MsNegative, InfoNceNegative,
                                  HllNegative, SplitNegative>;

/// A positive half and a negative half, freely mixed across loss functions.
struct WeightScheme {
  PositiveHalf positive = ContrastivePositive{};
  NegativeHalf negative = ContrastiveNegative{};

  /// Throws std::invalid_argument on out-of-range parameters.
  void validate() const;
  std::string describe() const;
};

/// Similarities of one anchor's full positive and negative sets (the pair
/// being weighted is a member of its own set).
struct AnchorContext {
  std::span<const double> positive_sims;
  std::span<const double> negative_sims;
};

double positive_weight(const WeightScheme& scheme, double similarity, const AnchorContext& ctx);
double negative_weight(const WeightScheme& scheme, double similarity, const AnchorContext& ctx);

/// Weight magnitudes for one similarity row; zero outside P_i and N_i.
std::vector<double> weight_row(const WeightScheme& scheme, std::span<const double> sim_row,
                               const AnchorPairs& pairs);

/// Nonnegative weight matrix, same shape as `sim`. Self entries are 0.
Matrix weight_matrix(const WeightScheme& scheme, const Matrix& sim, const PairPartition& partition);

/// (1/m) sum_i [sum_{N_i} w S - sum_{P_i} w S] with the weights held constant.
double surrogate_loss(const Matrix& weights, const Matrix& sim, const PairPartition& partition,
                      std::size_t batch_size);
double surrogate_loss(const WeightScheme& scheme, const Matrix& sim, const PairPartition& partition,
                      std::size_t batch_size);

/// Signs a weight matrix by pair type and divides by m: -w/m on positives, +w/m on negatives.
Matrix signed_pair_gradient(const Matrix& weights, const PairPartition& partition, std::size_t batch_size);

/// Gradient of the surrogate loss w.r.t. every S_ij.
Matrix grad_wrt_similarity(const WeightScheme& scheme, const Matrix& sim, const PairPartition& partition,
                           std::size_t batch_size);

// ---- closed-form losses ----

enum class LossKind { Contrastive, Binomial, MultiSimilarity, InfoNce };

/// One of the four losses whose weights the schemes above reproduce.
struct LossFamily {
  LossKind kind = LossKind::Contrastive;
  double alpha = 2.0;
  double beta = 50.0;
  double lambda = 0.5;
  double tau = 0.1;

  WeightScheme scheme() const;
};

/// Mean over anchors of the loss primitive. Its S-derivatives are the weights
/// of `family.scheme()` divided by the number of anchors.
///   contrastive: sum_P (1 - S) + sum_N max(0, S - lambda)
///   binomial:    sum_P softplus(alpha(lambda - S))/alpha + sum_N softplus(beta(S - lambda))/beta
///   MS:          log(1 + sum_P e^{alpha(lambda - S)})/alpha + log(1 + sum_N e^{beta(S - lambda)})/beta
///   InfoNCE:     -sum_P log softmax(S_p/tau against {S_p} u N)
double true_loss(const LossFamily& family, const Matrix& sim, const PairPartition& partition);

/// Analytic gradient of true_loss w.r.t. every S_ij.
Matrix grad_wrt_similarity(const LossFamily& family, const Matrix& sim, const PairPartition& partition);

// ---- curves and histograms ----

struct CurvePoint {
  double similarity;
  double w_pos;
  double w_neg;
};

/// Context for evaluating a weight curve. The evaluated similarity is inserted
/// into its own set; the opposite set holds the reference pair plus extras.
/// The default gives singleton P_i and N_i.
struct CurveContext {
  double reference_positive = 0.0;
  double reference_negative = 0.0;
  std::vector<double> extra_positives;
  std::vector<double> extra_negatives;
};

std::vector<double> uniform_grid(double lo, double hi, std::size_t points);

std::vector<CurvePoint> sample_weight_curve(const WeightScheme& scheme, std::span<const double> grid,
                                            const CurveContext& ctx = {});

struct ContributionHistogram {
  UniformBins bins;
  std::vector<double> positive_mass;
  std::vector<double> negative_mass;
};

/// Sum of weight magnitudes per similarity bin, per polarity.
ContributionHistogram gradient_contribution_histogram(const WeightScheme& scheme, const Matrix& sim,
                                                      const PairPartition& partition,
                                                      const UniformBins& bins);

}  // namespace pairlab
