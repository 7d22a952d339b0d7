#include "pairlab/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pairlab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// log(exp(seed) + sum_k exp(f(x_k))), shifted by the max exponent.
template <class F>
double log_sum_exp(std::span<const double> xs, F&& f, double seed = kNegInf) {
  double hi = seed;
  for (double x : xs) hi = std::max(hi, f(x));
  if (hi == kNegInf) return kNegInf;
  double acc = seed == kNegInf ? 0.0 : std::exp(seed - hi);
  for (double x : xs) acc += std::exp(f(x) - hi);
  return hi + std::log(acc);
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

// Per-anchor normalizers are computed once so that a whole row costs O(|P| + |N|).
class PositiveEvaluator {
 public:
  PositiveEvaluator(const PositiveHalf& half, const AnchorContext& ctx) : half_(half) {
    std::visit(overloaded{
                   [](const ContrastivePositive&) {},
                   [](const ConstantPositive&) {},
                   [](const BinomialPositive&) {},
                   [&](const MsPositive& h) {
                     require(!ctx.positive_sims.empty(), "MS positive weight needs the anchor's positive set");
                     log_norm_ = log_sum_exp(
                         ctx.positive_sims, [&](double s) { return h.alpha * (h.lambda - s); }, 0.0);
                   },
                   [&](const InfoNcePositive& h) {
                     require(!ctx.positive_sims.empty(), "InfoNCE positive weight needs the anchor's positive set");
                     log_norm_ = log_sum_exp(ctx.negative_sims, [&](double s) { return s / h.tau; });
                   },
               },
               half_);
  }

  double operator()(double s) const {
    return std::visit(
        overloaded{
            [](const ContrastivePositive&) { return 1.0; },
            [](const ConstantPositive&) { return 1.0; },
            [&](const BinomialPositive& h) { return sigmoid(h.alpha * (h.lambda - s)); },
            [&](const MsPositive& h) { return std::exp(h.alpha * (h.lambda - s) - log_norm_); },
            [&](const InfoNcePositive& h) {
              // 1 - softmax = (negative mass) / (total mass)
              if (log_norm_ == kNegInf) return 0.0;
              return std::exp(log_norm_ - log_add_exp(s / h.tau, log_norm_)) / h.tau;
            },
        },
        half_);
  }

 private:
  const PositiveHalf& half_;
  double log_norm_ = 0.0;
};

class NegativeEvaluator {
 public:
  NegativeEvaluator(const NegativeHalf& half, const AnchorContext& ctx) : half_(half) {
    std::visit(overloaded{
                   [&](const MsNegative& h) {
                     require(!ctx.negative_sims.empty(), "MS negative weight needs the anchor's negative set");
                     log_norm_ = log_sum_exp(
                         ctx.negative_sims, [&](double s) { return h.beta * (s - h.lambda); }, 0.0);
                   },
                   [&](const InfoNceNegative& h) {
                     require(!ctx.negative_sims.empty(), "InfoNCE negative weight needs the anchor's negative set");
                     const double lse_neg = log_sum_exp(ctx.negative_sims, [&](double s) { return s / h.tau; });
                     // log sum_p 1 / (exp(S_p/tau) + sum_n exp(S_n/tau))
                     log_norm_ = log_sum_exp(ctx.positive_sims,
                                             [&](double sp) { return -log_add_exp(sp / h.tau, lse_neg); });
                   },
                   [](const auto&) {},
               },
               half_);
  }

  double operator()(double s) const {
    return std::visit(overloaded{
                          [&](const ContrastiveNegative& h) { return s >= h.lambda ? 1.0 : 0.0; },
                          [&](const BinomialNegative& h) { return sigmoid(h.beta * (s - h.lambda)); },
                          [&](const MsNegative& h) { return std::exp(h.beta * (s - h.lambda) - log_norm_); },
                          [&](const InfoNceNegative& h) {
                            if (log_norm_ == kNegInf) return 0.0;
                            return std::exp(s / h.tau + log_norm_) / h.tau;
                          },
                          [&](const HllNegative& h) {
                            if (s >= h.b) return 1.0;
                            if (s < h.a) return 0.0;
                            return (s - h.a) / (h.b - h.a);
                          },
                          [&](const SplitNegative& h) {
                            const bool hard = s >= h.margin;
                            if (h.side == SplitNegative::Side::EasyBinomial) {
                              return hard ? 1.0 : sigmoid(h.beta * (s - h.margin));
                            }
                            return hard ? sigmoid(h.beta * (s - h.margin)) : 0.0;
                          },
                      },
                      half_);
  }

 private:
  const NegativeHalf& half_;
  double log_norm_ = 0.0;
};

struct GatheredRow {
  std::vector<double> pos;
  std::vector<double> neg;
  AnchorContext context() const { return {pos, neg}; }
};

GatheredRow gather(std::span<const double> row, const AnchorPairs& pairs) {
  GatheredRow g;
  g.pos.reserve(pairs.positives.size());
  g.neg.reserve(pairs.negatives.size());
  for (auto j : pairs.positives) g.pos.push_back(row[j]);
  for (auto j : pairs.negatives) g.neg.push_back(row[j]);
  return g;
}

std::span<const double> row_span(const Eigen::RowVectorXd& row) {
  return {row.data(), static_cast<std::size_t>(row.size())};
}

void check_shape(const Matrix& sim, const PairPartition& partition) {
  if (static_cast<std::size_t>(sim.rows()) != partition.num_anchors() ||
      static_cast<std::size_t>(sim.cols()) != partition.num_candidates) {
    throw std::invalid_argument("similarity matrix and pair partition disagree in shape");
  }
}

}  // namespace

void WeightScheme::validate() const {
  auto positive_scale = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be > 0");
  };
  auto threshold = [](double v, const char* name) {
    if (!(v >= -1.0 && v <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [-1, 1]");
  };
  std::visit(overloaded{
                 [](const ContrastivePositive&) {},
                 [](const ConstantPositive&) {},
                 [&](const BinomialPositive& h) { positive_scale(h.alpha, "alpha"); threshold(h.lambda, "lambda"); },
                 [&](const MsPositive& h) { positive_scale(h.alpha, "alpha"); threshold(h.lambda, "lambda"); },
                 [&](const InfoNcePositive& h) { positive_scale(h.tau, "tau"); },
             },
             positive);
  std::visit(overloaded{
                 [&](const ContrastiveNegative& h) { threshold(h.lambda, "lambda"); },
                 [&](const BinomialNegative& h) { positive_scale(h.beta, "beta"); threshold(h.lambda, "lambda"); },
                 [&](const MsNegative& h) { positive_scale(h.beta, "beta"); threshold(h.lambda, "lambda"); },
                 [&](const InfoNceNegative& h) { positive_scale(h.tau, "tau"); },
                 [&](const HllNegative& h) {
                   threshold(h.a, "a"); threshold(h.b, "b");
                   if (h.b < h.a) throw std::invalid_argument("HLL requires b >= a");
                 },
                 [&](const SplitNegative& h) { positive_scale(h.beta, "beta"); threshold(h.margin, "margin"); },
             },
             negative);
}

std::string WeightScheme::describe() const {
  std::ostringstream os;
  os << "pos=";
  std::visit(overloaded{
                 [&](const ContrastivePositive&) { os << "contrastive"; },
                 [&](const ConstantPositive&) { os << "constant"; },
                 [&](const BinomialPositive& h) { os << "binomial(alpha=" << h.alpha << ",lambda=" << h.lambda << ")"; },
                 [&](const MsPositive& h) { os << "ms(alpha=" << h.alpha << ",lambda=" << h.lambda << ")"; },
                 [&](const InfoNcePositive& h) { os << "infonce(tau=" << h.tau << ")"; },
             },
             positive);
  os << " neg=";
  std::visit(overloaded{
                 [&](const ContrastiveNegative& h) { os << "contrastive(lambda=" << h.lambda << ")"; },
                 [&](const BinomialNegative& h) { os << "binomial(beta=" << h.beta << ",lambda=" << h.lambda << ")"; },
                 [&](const MsNegative& h) { os << "ms(beta=" << h.beta << ",lambda=" << h.lambda << ")"; },
                 [&](const InfoNceNegative& h) { os << "infonce(tau=" << h.tau << ")"; },
                 [&](const HllNegative& h) { os << "hll(a=" << h.a << ",b=" << h.b << ")"; },
                 [&](const SplitNegative& h) {
                   os << (h.side == SplitNegative::Side::EasyBinomial ? "easy-binomial" : "hard-binomial")
                      << "(beta=" << h.beta << ",margin=" << h.margin << ")";
                 },
             },
             negative);
  return os.str();
}

double positive_weight(const WeightScheme& scheme, double similarity, const AnchorContext& ctx) {
  return PositiveEvaluator(scheme.positive, ctx)(similarity);
}

double negative_weight(const WeightScheme& scheme, double similarity, const AnchorContext& ctx) {
  return NegativeEvaluator(scheme.negative, ctx)(similarity);
}

std::vector<double> weight_row(const WeightScheme& scheme, std::span<const double> sim_row,
                               const AnchorPairs& pairs) {
  std::vector<double> out(sim_row.size(), 0.0);
  const auto g = gather(sim_row, pairs);
  const auto ctx = g.context();
  if (!pairs.positives.empty()) {
    const PositiveEvaluator pos(scheme.positive, ctx);
    for (auto j : pairs.positives) out[j] = pos(sim_row[j]);
  }
  if (!pairs.negatives.empty()) {
    const NegativeEvaluator neg(scheme.negative, ctx);
    for (auto j : pairs.negatives) out[j] = neg(sim_row[j]);
  }
  return out;
}

Matrix weight_matrix(const WeightScheme& scheme, const Matrix& sim, const PairPartition& partition) {
  check_shape(sim, partition);
  Matrix w = Matrix::Zero(sim.rows(), sim.cols());
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    const Eigen::RowVectorXd row = sim.row(i);
    const auto weights = weight_row(scheme, row_span(row), partition[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < sim.cols(); ++j) w(i, j) = weights[static_cast<std::size_t>(j)];
  }
  return w;
}

double surrogate_loss(const Matrix& weights, const Matrix& sim, const PairPartition& partition,
                      std::size_t batch_size) {
  check_shape(sim, partition);
  if (batch_size == 0) throw std::invalid_argument("surrogate_loss: batch size must be positive");
  double total = 0.0;
  for (std::size_t i = 0; i < partition.num_anchors(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (auto j : partition[i].negatives) total += weights(r, static_cast<Eigen::Index>(j)) * sim(r, static_cast<Eigen::Index>(j));
    for (auto j : partition[i].positives) total -= weights(r, static_cast<Eigen::Index>(j)) * sim(r, static_cast<Eigen::Index>(j));
  }
  return total / static_cast<double>(batch_size);
}

double surrogate_loss(const WeightScheme& scheme, const Matrix& sim, const PairPartition& partition,
                      std::size_t batch_size) {
  return surrogate_loss(weight_matrix(scheme, sim, partition), sim, partition, batch_size);
}

Matrix signed_pair_gradient(const Matrix& weights, const PairPartition& partition, std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  const double inv_m = 1.0 / static_cast<double>(batch_size);
  Matrix g = Matrix::Zero(weights.rows(), weights.cols());
  for (std::size_t i = 0; i < partition.num_anchors(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (auto j : partition[i].negatives) g(r, static_cast<Eigen::Index>(j)) = weights(r, static_cast<Eigen::Index>(j)) * inv_m;
    for (auto j : partition[i].positives) g(r, static_cast<Eigen::Index>(j)) = -weights(r, static_cast<Eigen::Index>(j)) * inv_m;
  }
  return g;
}

Matrix grad_wrt_similarity(const WeightScheme& scheme, const Matrix& sim, const PairPartition& partition,
                           std::size_t batch_size) {
  return signed_pair_gradient(weight_matrix(scheme, sim, partition), partition, batch_size);
}

WeightScheme LossFamily::scheme() const {
  switch (kind) {
    case LossKind::Contrastive:
      return {ContrastivePositive{}, ContrastiveNegative{lambda}};
    case LossKind::Binomial:
      return {BinomialPositive{alpha, lambda}, BinomialNegative{beta, lambda}};
    case LossKind::MultiSimilarity:
      return {MsPositive{alpha, lambda}, MsNegative{beta, lambda}};
    case LossKind::InfoNce:
      return {InfoNcePositive{tau}, InfoNceNegative{tau}};
  }
  throw std::invalid_argument("unknown loss kind");
}

double true_loss(const LossFamily& family, const Matrix& sim, const PairPartition& partition) {
  check_shape(sim, partition);
  if (partition.num_anchors() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < partition.num_anchors(); ++i) {
    const Eigen::RowVectorXd row = sim.row(static_cast<Eigen::Index>(i));
    const auto g = gather(row_span(row), partition[i]);
    switch (family.kind) {
      case LossKind::Contrastive:
        for (double s : g.pos) total += 1.0 - s;
        for (double s : g.neg) total += std::max(0.0, s - family.lambda);
        break;
      case LossKind::Binomial:
        for (double s : g.pos) total += softplus(family.alpha * (family.lambda - s)) / family.alpha;
        for (double s : g.neg) total += softplus(family.beta * (s - family.lambda)) / family.beta;
        break;
      case LossKind::MultiSimilarity:
        if (!g.pos.empty()) {
          total += log_sum_exp(g.pos, [&](double s) { return family.alpha * (family.lambda - s); }, 0.0) /
                   family.alpha;
        }
        if (!g.neg.empty()) {
          total += log_sum_exp(g.neg, [&](double s) { return family.beta * (s - family.lambda); }, 0.0) /
                   family.beta;
        }
        break;
      case LossKind::InfoNce: {
        const double lse_neg = log_sum_exp(g.neg, [&](double s) { return s / family.tau; });
        for (double sp : g.pos) total += log_add_exp(sp / family.tau, lse_neg) - sp / family.tau;
        break;
      }
    }
  }
  return total / static_cast<double>(partition.num_anchors());
}

Matrix grad_wrt_similarity(const LossFamily& family, const Matrix& sim, const PairPartition& partition) {
  return grad_wrt_similarity(family.scheme(), sim, partition, std::max<std::size_t>(partition.num_anchors(), 1));
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t points) {
  if (points == 0) throw std::invalid_argument("grid needs at least one point");
  if (points == 1) return {lo};
  std::vector<double> grid(points);
  const auto n = static_cast<double>(points - 1);
  // weighted form keeps round values (0.5, 0.0, ...) exact on symmetric grids
  for (std::size_t k = 0; k < points; ++k) {
    const auto kk = static_cast<double>(k);
    grid[k] = (lo * (n - kk) + hi * kk) / n;
  }
  return grid;
}

std::vector<CurvePoint> sample_weight_curve(const WeightScheme& scheme, std::span<const double> grid,
                                            const CurveContext& ctx) {
  std::vector<CurvePoint> out;
  out.reserve(grid.size());
  std::vector<double> pos, neg;
  for (double s : grid) {
    if (!(s >= -1.0 && s <= 1.0)) throw std::invalid_argument("curve grid must lie within [-1, 1]");
    CurvePoint p{s, 0.0, 0.0};

    pos.assign({s});
    pos.insert(pos.end(), ctx.extra_positives.begin(), ctx.extra_positives.end());
    neg.assign({ctx.reference_negative});
    neg.insert(neg.end(), ctx.extra_negatives.begin(), ctx.extra_negatives.end());
    p.w_pos = positive_weight(scheme, s, {pos, neg});

    pos.assign({ctx.reference_positive});
    pos.insert(pos.end(), ctx.extra_positives.begin(), ctx.extra_positives.end());
    neg.assign({s});
    neg.insert(neg.end(), ctx.extra_negatives.begin(), ctx.extra_negatives.end());
    p.w_neg = negative_weight(scheme, s, {pos, neg});

    out.push_back(p);
  }
  return out;
}

ContributionHistogram gradient_contribution_histogram(const WeightScheme& scheme, const Matrix& sim,
                                                      const PairPartition& partition,
                                                      const UniformBins& bins) {
  bins.validate();
  const Matrix w = weight_matrix(scheme, sim, partition);
  ContributionHistogram h{bins, std::vector<double>(bins.count, 0.0), std::vector<double>(bins.count, 0.0)};
  for (std::size_t i = 0; i < partition.num_anchors(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (auto j : partition[i].positives) {
      const auto c = static_cast<Eigen::Index>(j);
      h.positive_mass[bins.index(sim(r, c))] += w(r, c);
    }
    for (auto j : partition[i].negatives) {
      const auto c = static_cast<Eigen::Index>(j);
      h.negative_mass[bins.index(sim(r, c))] += w(r, c);
    }
  }
  return h;
}

}  // namespace pairlab
