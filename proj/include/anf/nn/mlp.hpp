#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <cereal/types/optional.hpp>
#include <cereal/types/vector.hpp>

#include "anf/dst/topology_mask.hpp"
#include "anf/error.hpp"
#include "anf/io/eigen_cereal.hpp"
#include "anf/rng.hpp"

namespace anf::nn {

template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

enum class Activation { ReLU };

struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims{256, 256};
  std::size_t output_dim = 0;
  Activation activation = Activation::ReLU;

  void validate() const {
    if (input_dim == 0 || output_dim == 0) throw ConfigError("MlpSpec: input and output dims must be positive");
    if (hidden_dims.empty()) throw ConfigError("MlpSpec: at least one hidden layer is required");
    for (auto h : hidden_dims)
      if (h == 0) throw ConfigError("MlpSpec: hidden dims must be positive");
  }

  std::size_t num_layers() const { return hidden_dims.size() + 1; }

  // (out, in) for layer i.
  std::pair<std::size_t, std::size_t> layer_shape(std::size_t i) const {
    const std::size_t in = i == 0 ? input_dim : hidden_dims[i - 1];
    const std::size_t out = i == hidden_dims.size() ? output_dim : hidden_dims[i];
    return {out, in};
  }

  template <class Archive>
  void serialize(Archive& ar) {
    ar(input_dim, hidden_dims, output_dim);
  }
};

// One affine layer. A present mask marks which weights exist; weights at
// absent positions are held at exactly zero.
template <class S>
struct LayerParams {
  Matrix<S> weights;  // [out x in]
  Vector<S> biases;   // [out]
  std::optional<dst::TopologyMask> mask;

  std::size_t out_dim() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t in_dim() const { return static_cast<std::size_t>(weights.cols()); }

  std::size_t existing_weights() const { return mask ? mask->count() : static_cast<std::size_t>(weights.size()); }

  template <class Derived>
  void mask_out(Eigen::MatrixBase<Derived>& m) const {
    if (!mask) return;
    const auto& bits = mask->bits();
    const Eigen::Index rows = m.rows(), cols = m.cols();
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r)
        if (!bits[static_cast<std::size_t>(r * cols + c)]) m(r, c) = S(0);
  }

  void apply_mask() { mask_out(weights); }

  template <class Archive>
  void serialize(Archive& ar) {
    ar(weights, biases, mask);
  }
};

template <class S>
struct LayerGrads {
  Matrix<S> weights;
  Vector<S> biases;
};

template <class S>
struct Gradients {
  std::vector<LayerGrads<S>> layers;
};

// Activation record of one forward pass: the input to every layer and the
// pre-activations of the hidden layers. Columns are batch items.
template <class S>
struct ForwardCache {
  std::vector<Matrix<S>> inputs;
  std::vector<Matrix<S>> pre_activations;
  std::uint64_t version = 0;
  const void* owner = nullptr;
};

template <class S>
class Mlp {
 public:
  Mlp() = default;

  // Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Mlp(MlpSpec spec, Rng& rng) : spec_(std::move(spec)) {
    spec_.validate();
    layers_.resize(spec_.num_layers());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      auto [out, in] = spec_.layer_shape(i);
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      auto& L = layers_[i];
      L.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
      L.biases.resize(static_cast<Eigen::Index>(out));
      for (Eigen::Index c = 0; c < L.weights.cols(); ++c)
        for (Eigen::Index r = 0; r < L.weights.rows(); ++r) L.weights(r, c) = static_cast<S>(rng.uniform(-bound, bound));
      for (Eigen::Index r = 0; r < L.biases.size(); ++r) L.biases(r) = static_cast<S>(rng.uniform(-bound, bound));
    }
  }

  // Assemble from explicit layers (tests, deserialization).
  Mlp(MlpSpec spec, std::vector<LayerParams<S>> layers) : spec_(std::move(spec)), layers_(std::move(layers)) {
    spec_.validate();
    if (layers_.size() != spec_.num_layers()) throw ConfigError("Mlp: layer count does not match spec");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      auto [out, in] = spec_.layer_shape(i);
      if (layers_[i].out_dim() != out || layers_[i].in_dim() != in ||
          static_cast<std::size_t>(layers_[i].biases.size()) != out)
        throw ConfigError("Mlp: layer " + std::to_string(i) + " shape does not match spec");
      layers_[i].apply_mask();
    }
  }

  const MlpSpec& spec() const { return spec_; }
  std::size_t num_layers() const { return layers_.size(); }
  const LayerParams<S>& layer(std::size_t i) const { return layers_.at(i); }
  const std::vector<LayerParams<S>>& layers() const { return layers_; }

  // Mutable access invalidates outstanding forward caches.
  LayerParams<S>& mutable_layer(std::size_t i) {
    ++version_;
    return layers_.at(i);
  }

  std::uint64_t version() const { return version_; }

  void set_mask(std::size_t i, dst::TopologyMask mask) {
    auto& L = mutable_layer(i);
    if (mask.rows() != L.out_dim() || mask.cols() != L.in_dim()) throw ConfigError("Mlp::set_mask: shape mismatch");
    L.mask = std::move(mask);
    L.apply_mask();
  }

  // input: [input_dim x batch]. Hidden layers use ReLU, output is linear.
  Matrix<S> forward(const Matrix<S>& input, ForwardCache<S>* cache = nullptr) const {
    if (static_cast<std::size_t>(input.rows()) != spec_.input_dim)
      throw ConfigError("Mlp::forward: input has " + std::to_string(input.rows()) + " rows, expected " +
                        std::to_string(spec_.input_dim));
    if (cache) {
      cache->inputs.assign(layers_.size(), Matrix<S>());
      cache->pre_activations.assign(layers_.size() - 1, Matrix<S>());
      cache->version = version_;
      cache->owner = this;
    }
    Matrix<S> x = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& L = layers_[i];
      Matrix<S> z = L.weights * x;
      z.colwise() += L.biases;
      if (cache) cache->inputs[i] = std::move(x);
      if (i + 1 < layers_.size()) {
        if (cache) cache->pre_activations[i] = z;
        x = z.cwiseMax(S(0));
      } else {
        x = std::move(z);
      }
    }
    return x;
  }

  Vector<S> forward(const Vector<S>& input) const {
    Matrix<S> in = input;
    return forward(in, nullptr).col(0);
  }

  // Chain rule through the cached pass. Gradients at absent connections
  // are reported as zero. If input_grad is given it receives dL/dinput.
  Gradients<S> backward(const ForwardCache<S>& cache, const Matrix<S>& output_grad,
                        Matrix<S>* input_grad = nullptr) const {
    if (cache.owner != this || cache.inputs.size() != layers_.size())
      throw UsageError("Mlp::backward: cache was not produced by this network");
    if (cache.version != version_) throw UsageError("Mlp::backward: cache is stale (parameters changed since forward)");
    if (static_cast<std::size_t>(output_grad.rows()) != spec_.output_dim ||
        output_grad.cols() != cache.inputs.back().cols())
      throw ConfigError("Mlp::backward: output gradient shape mismatch");

    Gradients<S> g;
    g.layers.resize(layers_.size());
    Matrix<S> dz = output_grad;
    for (std::size_t k = layers_.size(); k-- > 0;) {
      const auto& L = layers_[k];
      auto& gl = g.layers[k];
      gl.weights.noalias() = dz * cache.inputs[k].transpose();
      gl.biases = dz.rowwise().sum();
      L.mask_out(gl.weights);
      if (k == 0 && input_grad == nullptr) break;
      Matrix<S> da = L.weights.transpose() * dz;
      if (k == 0) {
        *input_grad = std::move(da);
        break;
      }
      dz = (cache.pre_activations[k - 1].array() > S(0)).select(da, S(0));
    }
    return g;
  }

  // Number of existing weights (biases excluded).
  std::size_t existing_weights() const {
    std::size_t n = 0;
    for (const auto& L : layers_) n += L.existing_weights();
    return n;
  }

  std::size_t total_weights() const {
    std::size_t n = 0;
    for (const auto& L : layers_) n += static_cast<std::size_t>(L.weights.size());
    return n;
  }

  template <class Archive>
  void serialize(Archive& ar) {
    ar(spec_, layers_, version_);
  }

 private:
  MlpSpec spec_;
  std::vector<LayerParams<S>> layers_;
  std::uint64_t version_ = 0;
};

// target <- tau * online + (1 - tau) * target, weights and biases.
template <class S>
void polyak_update(Mlp<S>& target, const Mlp<S>& online, double tau) {
  const S t = static_cast<S>(tau);
  for (std::size_t i = 0; i < online.num_layers(); ++i) {
    auto& T = target.mutable_layer(i);
    const auto& O = online.layer(i);
    T.weights = t * O.weights + (S(1) - t) * T.weights;
    T.biases = t * O.biases + (S(1) - t) * T.biases;
  }
}

}  // namespace anf::nn
