#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "pairlab/core.hpp"

namespace pairlab {

struct DenseLayer {
  Matrix weight;  // fan_out x fan_in
  Vector bias;    // fan_out
};

/// Layer list shared by parameters and their gradients.
struct LayerStack {
  std::vector<DenseLayer> layers;

  /// [d_in, d_h..., d_e]
  std::vector<std::size_t> dims() const;
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t num_parameters() const;
  bool same_shape(const LayerStack& other) const;
  bool all_finite() const;
};

/// Weights of an MLP encoder: rectifier on hidden layers, identity on the
/// output layer, l2 normalization of the result.
struct MlpEncoderParams : LayerStack {};

/// Gradient w.r.t. every entry of an MlpEncoderParams, same shape.
struct ParamGradient : LayerStack {
  static ParamGradient zeros_like(const LayerStack& shape);
};

/// Weights ~ N(0, 1/fan_in), biases zero. Deterministic in `seed`.
/// Throws std::invalid_argument if dims has fewer than two entries, any zero
/// entry, or an embedding dimension below 2.
MlpEncoderParams init_encoder(const std::vector<std::size_t>& layer_dims, std::uint64_t seed);

/// Values saved by forward() for backward().
struct ForwardCache {
  std::vector<Matrix> layer_inputs;    // input to each layer, rows = samples
  std::vector<Matrix> pre_activations; // W h + b for each layer
  Vector norms;                        // |u| of each pre-normalization output
  Matrix embeddings;                   // normalized outputs
};

struct ForwardResult {
  Matrix embeddings;  // rows are unit vectors
  ForwardCache cache;
};

/// Encodes every row of `inputs`. Throws DegenerateEmbedding when an output
/// is the zero vector and std::invalid_argument on an input-dimension mismatch.
ForwardResult forward(const MlpEncoderParams& params, const Matrix& inputs);

/// Embeddings only.
Matrix encode(const MlpEncoderParams& params, const Matrix& inputs);

/// Backpropagates dL/d(normalized embeddings) to every parameter.
ParamGradient backward(const MlpEncoderParams& params, const ForwardCache& cache,
                       const Matrix& grad_wrt_embeddings);

/// Gradient of the surrogate loss w.r.t. each anchor embedding with the
/// candidates held constant: sum_{N_i} (w/m) c_j - sum_{P_i} (w/m) c_j.
Matrix chain_pair_gradient(const Matrix& weights, const PairPartition& partition, const Matrix& anchors,
                           const Matrix& candidates, std::size_t batch_size);

/// In-batch variant where anchors and candidates are the same embeddings and
/// both ends of every pair receive gradient.
Matrix chain_pair_gradient_in_batch(const Matrix& weights, const PairPartition& partition,
                                    const Matrix& embeddings, std::size_t batch_size);

/// Layer-major flattening; weights row-major, then the bias.
Vector flatten(const LayerStack& params);
void unflatten(LayerStack& params, const Vector& flat);

/// Binary snapshot: "PLMLP001", u64 layer count, u64 dims, then doubles in flatten() order.
void save_params(const MlpEncoderParams& params, const std::filesystem::path& path);
MlpEncoderParams load_params(const std::filesystem::path& path);

}  // namespace pairlab
