#include "pairlab/encoder.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

#include "pairlab/error.hpp"
#include "pairlab/weighting.hpp"

namespace pairlab {

namespace {

constexpr std::array<char, 8> kMagic{'P', 'L', 'M', 'L', 'P', '0', '0', '1'};

}  // namespace

std::vector<std::size_t> LayerStack::dims() const {
  std::vector<std::size_t> d;
  if (layers.empty()) return d;
  d.push_back(static_cast<std::size_t>(layers.front().weight.cols()));
  for (const auto& l : layers) d.push_back(static_cast<std::size_t>(l.weight.rows()));
  return d;
}

std::size_t LayerStack::input_dim() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.cols());
}

std::size_t LayerStack::output_dim() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weight.rows());
}

std::size_t LayerStack::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool LayerStack::same_shape(const LayerStack& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& a = layers[k];
    const auto& b = other.layers[k];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() || a.bias.size() != b.bias.size()) {
      return false;
    }
  }
  return true;
}

bool LayerStack::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

ParamGradient ParamGradient::zeros_like(const LayerStack& shape) {
  ParamGradient g;
  g.layers.reserve(shape.layers.size());
  for (const auto& l : shape.layers) {
    g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  }
  return g;
}

MlpEncoderParams init_encoder(const std::vector<std::size_t>& layer_dims, std::uint64_t seed) {
  if (layer_dims.size() < 2) throw std::invalid_argument("init_encoder: need at least input and output dims");
  for (auto d : layer_dims) {
    if (d == 0) throw std::invalid_argument("init_encoder: zero layer width");
  }
  if (layer_dims.back() < 2) throw std::invalid_argument("init_encoder: embedding dimension must be >= 2");

  std::mt19937_64 rng(seed);
  MlpEncoderParams p;
  for (std::size_t k = 0; k + 1 < layer_dims.size(); ++k) {
    const auto fan_in = static_cast<Eigen::Index>(layer_dims[k]);
    const auto fan_out = static_cast<Eigen::Index>(layer_dims[k + 1]);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
    DenseLayer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weight(r, c) = dist(rng);
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

ForwardResult forward(const MlpEncoderParams& params, const Matrix& inputs) {
  if (params.layers.empty()) throw std::invalid_argument("forward: encoder has no layers");
  if (static_cast<std::size_t>(inputs.cols()) != params.input_dim()) {
    throw std::invalid_argument("forward: input dimension " + std::to_string(inputs.cols()) +
                                " does not match encoder input " + std::to_string(params.input_dim()));
  }
  ForwardResult out;
  auto& cache = out.cache;
  Matrix h = inputs;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const auto& layer = params.layers[k];
    Matrix z = h * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    cache.layer_inputs.push_back(std::move(h));
    const bool hidden = k + 1 < params.layers.size();
    h = hidden ? Matrix(z.cwiseMax(0.0)) : z;
    cache.pre_activations.push_back(std::move(z));
  }
  cache.norms = h.rowwise().norm();
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    const double n = cache.norms(r);
    if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateEmbedding();
    h.row(r) /= n;
  }
  cache.embeddings = h;
  out.embeddings = std::move(h);
  return out;
}

Matrix encode(const MlpEncoderParams& params, const Matrix& inputs) { return forward(params, inputs).embeddings; }

ParamGradient backward(const MlpEncoderParams& params, const ForwardCache& cache,
                       const Matrix& grad_wrt_embeddings) {
  const auto& v = cache.embeddings;
  if (grad_wrt_embeddings.rows() != v.rows() || grad_wrt_embeddings.cols() != v.cols() ||
      cache.pre_activations.size() != params.layers.size()) {
    throw std::invalid_argument("backward: gradient/cache shape mismatch");
  }
  // through v = u / |u|: du = (I - v v^T) dv / |u|
  const Vector radial = (grad_wrt_embeddings.cwiseProduct(v)).rowwise().sum();
  Matrix dz = grad_wrt_embeddings - v.cwiseProduct(radial.replicate(1, v.cols()));
  dz.array().colwise() /= cache.norms.array();

  ParamGradient grad = ParamGradient::zeros_like(params);
  for (std::size_t k = params.layers.size(); k-- > 0;) {
    grad.layers[k].weight = dz.transpose() * cache.layer_inputs[k];
    grad.layers[k].bias = dz.colwise().sum().transpose();
    if (k == 0) break;
    Matrix dh = dz * params.layers[k].weight;
    // rectifier subgradient at 0 is 0
    dz = dh.cwiseProduct((cache.pre_activations[k - 1].array() > 0.0).cast<double>().matrix());
  }
  return grad;
}

Matrix chain_pair_gradient(const Matrix& weights, const PairPartition& partition, const Matrix& anchors,
                           const Matrix& candidates, std::size_t batch_size) {
  if (weights.rows() != anchors.rows() || weights.cols() != candidates.rows() ||
      anchors.cols() != candidates.cols()) {
    throw std::invalid_argument("chain_pair_gradient: shape mismatch");
  }
  return signed_pair_gradient(weights, partition, batch_size) * candidates;
}

Matrix chain_pair_gradient_in_batch(const Matrix& weights, const PairPartition& partition,
                                    const Matrix& embeddings, std::size_t batch_size) {
  if (weights.rows() != embeddings.rows() || weights.cols() != embeddings.rows()) {
    throw std::invalid_argument("chain_pair_gradient_in_batch: shape mismatch");
  }
  const Matrix g = signed_pair_gradient(weights, partition, batch_size);
  return g * embeddings + g.transpose() * embeddings;
}

Vector flatten(const LayerStack& params) {
  Vector flat(static_cast<Eigen::Index>(params.num_parameters()));
  Eigen::Index at = 0;
  for (const auto& l : params.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) flat(at++) = l.weight(r, c);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) flat(at++) = l.bias(r);
  }
  return flat;
}

void unflatten(LayerStack& params, const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != params.num_parameters()) {
    throw std::invalid_argument("unflatten: size mismatch");
  }
  Eigen::Index at = 0;
  for (auto& l : params.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat(at++);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = flat(at++);
  }
}

void save_params(const MlpEncoderParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  const auto dims = params.dims();
  const std::uint64_t n_layers = params.layers.size();
  out.write(reinterpret_cast<const char*>(&n_layers), sizeof n_layers);
  for (auto d : dims) {
    const std::uint64_t d64 = d;
    out.write(reinterpret_cast<const char*>(&d64), sizeof d64);
  }
  const Vector flat = flatten(params);
  out.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

MlpEncoderParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error(path.string() + ": not a parameter snapshot");
  std::uint64_t n_layers = 0;
  in.read(reinterpret_cast<char*>(&n_layers), sizeof n_layers);
  if (!in || n_layers == 0 || n_layers > 1024) throw std::runtime_error(path.string() + ": bad layer count");
  std::vector<std::size_t> dims(n_layers + 1);
  for (auto& d : dims) {
    std::uint64_t d64 = 0;
    in.read(reinterpret_cast<char*>(&d64), sizeof d64);
    d = d64;
  }
  if (!in) throw std::runtime_error(path.string() + ": truncated header");
  MlpEncoderParams p = init_encoder(dims, 0);
  Vector flat(static_cast<Eigen::Index>(p.num_parameters()));
  in.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!in) throw std::runtime_error(path.string() + ": truncated parameters");
  unflatten(p, flat);
  return p;
}

}  // namespace pairlab
