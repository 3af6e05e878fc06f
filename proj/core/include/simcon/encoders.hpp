#pragma once

#include <cstdint>
#include <vector>

#include "simcon/numerics.hpp"

namespace simcon {

// One affine layer in row-vector convention: y = x * weight + bias, with
// weight sized (in x out).
struct Layer {
  Matrix weight;
  std::vector<double> bias;
};

// Small perceptron: tanh between layers, linear final layer, followed by
// row L2 normalization in encode()/project(). Stands in for the real dual
// encoders; everything downstream only assumes normalized embeddings and
// exact parameter gradients.
struct Mlp {
  std::vector<Layer> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.rows(); }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().weight.cols(); }
  std::size_t parameter_count() const;
};

using EncoderParams = Mlp;

// Projection head for the view-consistency loss. An empty layer list acts as
// a passthrough (renormalization only), which gives tests an exact
// identity-equivalent head.
struct ProjectionHead {
  Mlp net;

  static ProjectionHead identity() { return ProjectionHead{}; }
};

struct LayerGrads {
  Matrix weight;
  std::vector<double> bias;
};

struct MlpGrads {
  std::vector<LayerGrads> layers;
};

// Activations cached by the forward pass for the backward pass.
struct ForwardCache {
  std::vector<Matrix> layer_inputs;  // input of each layer (layer_inputs[0] = raw)
  Matrix unnormalized;               // final layer output before normalization
  std::vector<double> row_norms;
  EmbeddingBatch output;
};

// Glorot-uniform weights (a = sqrt(6 / (fan_in + fan_out))), zero biases,
// deterministic per seed. Empty hidden_dims gives a single linear layer.
Mlp init_encoder(std::uint64_t seed, std::size_t input_dim,
                 const std::vector<std::size_t>& hidden_dims, std::size_t output_dim);

// Two-layer head (dim -> hidden_dim -> dim) with tanh in between.
ProjectionHead init_projection_head(std::uint64_t seed, std::size_t dim, std::size_t hidden_dim);

// Forward pass then row normalization. Throws ZeroRowError if a
// pre-normalization row collapses to zero.
ForwardCache encode_cached(const Mlp& net, const Matrix& raw);
EmbeddingBatch encode(const Mlp& net, const Matrix& raw);

// Chain rule from grad_z (gradient w.r.t. the normalized output) back to the
// parameters. Per row the normalization Jacobian is (I - z z^T) / ||u||.
// If grad_input is non-null it receives the gradient w.r.t. the raw input.
MlpGrads encoder_backward(const Mlp& net, const ForwardCache& cache, const Matrix& grad_z,
                          Matrix* grad_input = nullptr);

ForwardCache project_cached(const ProjectionHead& head, const EmbeddingBatch& z);
EmbeddingBatch project(const ProjectionHead& head, const EmbeddingBatch& z);

MlpGrads zero_grads_like(const Mlp& net);
void accumulate(MlpGrads& into, const MlpGrads& other);

// Flattened parameter views, used by the optimizer and the gradient checks.
std::vector<double> flatten_parameters(const Mlp& net);
void load_parameters(Mlp& net, std::span<const double> flat);
std::vector<double> flatten_grads(const MlpGrads& grads);

}  // namespace simcon
