#include "simcon/encoders.hpp"

#include <cmath>

#include "simcon/rng.hpp"

namespace simcon {

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

Mlp init_encoder(std::uint64_t seed, std::size_t input_dim,
                 const std::vector<std::size_t>& hidden_dims, std::size_t output_dim) {
  if (input_dim == 0 || output_dim == 0) throw InvalidSpecError("encoder dims must be >= 1");
  for (std::size_t h : hidden_dims)
    if (h == 0) throw InvalidSpecError("encoder hidden dims must be >= 1");

  std::vector<std::size_t> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(output_dim);

  Rng rng(seed);
  Mlp net;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t fan_in = dims[l];
    const std::size_t fan_out = dims[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Layer layer{Matrix(fan_in, fan_out), std::vector<double>(fan_out, 0.0)};
    for (double& w : layer.weight.flat()) w = rng.uniform(-a, a);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

ProjectionHead init_projection_head(std::uint64_t seed, std::size_t dim, std::size_t hidden_dim) {
  return ProjectionHead{init_encoder(seed, dim, {hidden_dim}, dim)};
}

namespace {

Matrix affine(const Matrix& x, const Layer& layer) {
  Matrix y = matmul(x, layer.weight);
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) += layer.bias[j];
  return y;
}

}  // namespace

ForwardCache encode_cached(const Mlp& net, const Matrix& raw) {
  require_finite(raw, "encode input");
  if (!net.layers.empty() && raw.cols() != net.input_dim())
    throw ShapeMismatchError("encode: input dimension does not match encoder");

  ForwardCache cache;
  Matrix x = raw;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    cache.layer_inputs.push_back(x);
    Matrix y = affine(x, net.layers[l]);
    if (l + 1 < net.layers.size())
      for (double& v : y.flat()) v = std::tanh(v);
    x = std::move(y);
  }
  cache.unnormalized = x;

  Matrix z(x.rows(), x.cols());
  cache.row_norms.resize(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) sq += x(i, j) * x(i, j);
    const double norm = std::sqrt(sq);
    if (norm <= 1e-12) throw ZeroRowError(i);
    cache.row_norms[i] = norm;
    for (std::size_t j = 0; j < x.cols(); ++j) z(i, j) = x(i, j) / norm;
  }
  cache.output = EmbeddingBatch{std::move(z), true};
  return cache;
}

EmbeddingBatch encode(const Mlp& net, const Matrix& raw) {
  return encode_cached(net, raw).output;
}

MlpGrads encoder_backward(const Mlp& net, const ForwardCache& cache, const Matrix& grad_z,
                          Matrix* grad_input) {
  const Matrix& z = cache.output.matrix;
  if (!grad_z.same_shape(z)) throw ShapeMismatchError("encoder_backward: grad shape mismatch");

  // Through the normalization: du = (dz - (dz . z) z) / ||u|| per row.
  Matrix grad(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) dot += grad_z(i, j) * z(i, j);
    for (std::size_t j = 0; j < z.cols(); ++j)
      grad(i, j) = (grad_z(i, j) - dot * z(i, j)) / cache.row_norms[i];
  }

  MlpGrads grads;
  grads.layers.resize(net.layers.size());
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    // grad currently holds dL/d(output of layer l). Hidden layers apply tanh
    // after the affine map; its input equals the next layer's cached input.
    if (l + 1 < net.layers.size()) {
      const Matrix& activated = cache.layer_inputs[l + 1];
      for (std::size_t k = 0; k < grad.size(); ++k) {
        const double t = activated.flat()[k];
        grad.flat()[k] *= 1.0 - t * t;
      }
    }
    const Matrix& x = cache.layer_inputs[l];
    grads.layers[l].weight = matmul_transa(x, grad);
    grads.layers[l].bias.assign(grad.cols(), 0.0);
    for (std::size_t i = 0; i < grad.rows(); ++i)
      for (std::size_t j = 0; j < grad.cols(); ++j) grads.layers[l].bias[j] += grad(i, j);
    if (l > 0 || grad_input != nullptr) grad = matmul_transb(grad, net.layers[l].weight);
  }
  if (grad_input != nullptr) *grad_input = std::move(grad);
  return grads;
}

ForwardCache project_cached(const ProjectionHead& head, const EmbeddingBatch& z) {
  if (!head.net.layers.empty() && head.net.output_dim() != z.dim())
    throw ShapeMismatchError("project: head output dimension must equal embedding dimension");
  return encode_cached(head.net, z.matrix);
}

EmbeddingBatch project(const ProjectionHead& head, const EmbeddingBatch& z) {
  return project_cached(head, z).output;
}

MlpGrads zero_grads_like(const Mlp& net) {
  MlpGrads grads;
  grads.layers.reserve(net.layers.size());
  for (const auto& l : net.layers)
    grads.layers.push_back(
        LayerGrads{Matrix(l.weight.rows(), l.weight.cols()), std::vector<double>(l.bias.size(), 0.0)});
  return grads;
}

void accumulate(MlpGrads& into, const MlpGrads& other) {
  if (into.layers.size() != other.layers.size())
    throw ShapeMismatchError("accumulate: layer count mismatch");
  for (std::size_t l = 0; l < into.layers.size(); ++l) {
    axpy(1.0, other.layers[l].weight, into.layers[l].weight);
    for (std::size_t j = 0; j < into.layers[l].bias.size(); ++j)
      into.layers[l].bias[j] += other.layers[l].bias[j];
  }
}

std::vector<double> flatten_parameters(const Mlp& net) {
  std::vector<double> flat;
  for (const auto& l : net.layers) {
    flat.insert(flat.end(), l.weight.flat().begin(), l.weight.flat().end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

void load_parameters(Mlp& net, std::span<const double> flat) {
  std::size_t pos = 0;
  for (auto& l : net.layers) {
    for (double& w : l.weight.flat()) w = flat[pos++];
    for (double& b : l.bias) b = flat[pos++];
  }
  if (pos != flat.size()) throw ShapeMismatchError("load_parameters: length mismatch");
}

std::vector<double> flatten_grads(const MlpGrads& grads) {
  std::vector<double> flat;
  for (const auto& l : grads.layers) {
    flat.insert(flat.end(), l.weight.flat().begin(), l.weight.flat().end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

}  // namespace simcon
