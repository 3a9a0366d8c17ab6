#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "anf/nn/mlp.hpp"

namespace anf::nn {

struct AdamConfig {
  double lr = 1e-3;
  double weight_decay = 2e-4;  // L2 term added to weight gradients; biases are not decayed
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  template <class Archive>
  void serialize(Archive& ar) {
    ar(lr, weight_decay, beta1, beta2, epsilon);
  }
};

// First/second raw moments per parameter of one Mlp.
template <class S>
struct AdamState {
  AdamConfig config;
  std::vector<Matrix<S>> m_weights, v_weights;
  std::vector<Vector<S>> m_biases, v_biases;
  std::int64_t step_count = 0;

  AdamState() = default;
  AdamState(const Mlp<S>& net, AdamConfig cfg) : config(cfg) {
    for (const auto& L : net.layers()) {
      m_weights.push_back(Matrix<S>::Zero(L.weights.rows(), L.weights.cols()));
      v_weights.push_back(Matrix<S>::Zero(L.weights.rows(), L.weights.cols()));
      m_biases.push_back(Vector<S>::Zero(L.biases.size()));
      v_biases.push_back(Vector<S>::Zero(L.biases.size()));
    }
  }

  template <class Archive>
  void serialize(Archive& ar) {
    ar(config, m_weights, v_weights, m_biases, v_biases, step_count);
  }
};

// Bias-corrected Adam step. Absent connections keep weight, m and v at 0.
template <class S>
void adam_step(AdamState<S>& state, Mlp<S>& net, const Gradients<S>& grads) {
  if (grads.layers.size() != net.num_layers() || state.m_weights.size() != net.num_layers())
    throw ConfigError("adam_step: layer count mismatch");
  const auto& c = state.config;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const S b1 = static_cast<S>(c.beta1), b2 = static_cast<S>(c.beta2);
  const S bc1 = static_cast<S>(1.0 - std::pow(c.beta1, t));
  const S bc2 = static_cast<S>(1.0 - std::pow(c.beta2, t));
  const S lr = static_cast<S>(c.lr), eps = static_cast<S>(c.epsilon), wd = static_cast<S>(c.weight_decay);

  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    auto& L = net.mutable_layer(i);
    const auto& g = grads.layers[i];
    if (g.weights.rows() != L.weights.rows() || g.weights.cols() != L.weights.cols() ||
        g.biases.size() != L.biases.size())
      throw ConfigError("adam_step: gradient shape mismatch at layer " + std::to_string(i));

    Matrix<S> gw = g.weights;
    if (wd != S(0)) gw += wd * L.weights;
    L.mask_out(gw);
    auto& m = state.m_weights[i];
    auto& v = state.v_weights[i];
    m = b1 * m + (S(1) - b1) * gw;
    v = b2 * v + (S(1) - b2) * gw.cwiseAbs2();
    L.weights.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
    L.apply_mask();
    L.mask_out(m);
    L.mask_out(v);

    auto& mb = state.m_biases[i];
    auto& vb = state.v_biases[i];
    mb = b1 * mb + (S(1) - b1) * g.biases;
    vb = b2 * vb + (S(1) - b2) * g.biases.cwiseAbs2();
    L.biases.array() -= lr * (mb.array() / bc1) / ((vb.array() / bc2).sqrt() + eps);
  }
}

// Reset m and v at the given flat (row-major) weight positions of one layer.
template <class S>
void zero_moments(AdamState<S>& state, std::size_t layer, std::span<const std::size_t> positions) {
  if (layer >= state.m_weights.size()) throw UsageError("zero_moments: layer index out of range");
  auto& m = state.m_weights[layer];
  auto& v = state.v_weights[layer];
  const auto cols = static_cast<std::size_t>(m.cols());
  const auto size = static_cast<std::size_t>(m.size());
  for (auto p : positions) {
    if (p >= size) throw UsageError("zero_moments: position " + std::to_string(p) + " out of range");
    const auto r = static_cast<Eigen::Index>(p / cols), col = static_cast<Eigen::Index>(p % cols);
    m(r, col) = S(0);
    v(r, col) = S(0);
  }
}

}  // namespace anf::nn
