#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <cereal/types/vector.hpp>

#include "anf/dst/topology_mask.hpp"
#include "anf/nn/adam.hpp"
#include "anf/nn/mlp.hpp"
#include "anf/rng.hpp"

namespace anf::dst {

enum class TopologyMode { dynamic, static_ };
enum class SparseLayers { input_only, input_and_hidden };

struct SparsityConfig {
  double input_layer_sparsity = 0.8;
  double drop_fraction = 0.05;
  std::int64_t topology_period = 1000;  // env steps
  TopologyMode mode = TopologyMode::dynamic;
  SparseLayers sparse_layers = SparseLayers::input_only;
  std::optional<double> global_sparsity;
  // Exclude connections grown at update t from the drop at update t+1.
  bool protect_new_growth = false;

  void validate() const {
    if (!(input_layer_sparsity >= 0.0 && input_layer_sparsity < 1.0))
      throw ConfigError("sparsity.input_layer_sparsity must be in [0, 1)");
    if (!(drop_fraction > 0.0 && drop_fraction < 1.0)) throw ConfigError("sparsity.drop_fraction must be in (0, 1)");
    if (topology_period <= 0) throw ConfigError("sparsity.topology_period must be positive");
    if (sparse_layers == SparseLayers::input_and_hidden && !global_sparsity)
      throw ConfigError("sparsity.global_sparsity is required when hidden layers are sparse");
    if (global_sparsity && !(*global_sparsity >= 0.0 && *global_sparsity < 1.0))
      throw ConfigError("sparsity.global_sparsity must be in [0, 1)");
  }
};

struct TopologyDelta {
  std::vector<std::size_t> dropped;  // flat indices, ascending magnitude order
  std::vector<std::size_t> grown;    // flat indices, ascending
  std::int64_t step = 0;
  std::size_t growth_shortfall = 0;  // requested growth that found no vacant position

  bool empty() const { return dropped.empty() && grown.empty(); }

  template <class Archive>
  void serialize(Archive& ar) {
    ar(dropped, grown, step, growth_shortfall);
  }
};

// Number of connections kept at a given sparsity.
inline std::size_t kept_connections(std::size_t rows, std::size_t cols, double sparsity) {
  return static_cast<std::size_t>(std::llround((1.0 - sparsity) * static_cast<double>(rows * cols)));
}

// Uniformly random mask with round((1 - sparsity) * rows * cols) connections.
inline TopologyMask init_mask(std::size_t rows, std::size_t cols, double sparsity, Rng& rng) {
  if (!(sparsity >= 0.0 && sparsity < 1.0)) throw ConfigError("init_mask: sparsity must be in [0, 1)");
  const std::size_t total = rows * cols;
  const std::size_t keep = kept_connections(rows, cols, sparsity);
  if (keep == total) return TopologyMask(rows, cols);
  auto mask = TopologyMask::empty(rows, cols, 1.0 - sparsity);
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // partial Fisher-Yates
  for (std::size_t i = 0; i < keep; ++i) {
    const auto j = static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(i), static_cast<std::int64_t>(total - 1)));
    std::swap(idx[i], idx[j]);
    mask.set_flat(idx[i], true);
  }
  return mask;
}

inline std::size_t drop_count(double drop_fraction, std::size_t existing) {
  return static_cast<std::size_t>(std::floor(drop_fraction * static_cast<double>(existing) + 1e-9));
}

// SET update on one layer: drop the floor(d_f * k) existing weights with the
// smallest magnitude (ties: lowest flat index first), regrow as many at
// uniformly random vacant positions with weight 0. `protected_positions`
// (sorted) are never dropped.
template <class S>
TopologyDelta evolve(TopologyMask& mask, nn::Matrix<S>& weights, double drop_fraction, Rng& rng,
                     std::span<const std::size_t> protected_positions = {}) {
  if (static_cast<std::size_t>(weights.rows()) != mask.rows() || static_cast<std::size_t>(weights.cols()) != mask.cols())
    throw ConfigError("evolve: weight/mask shape mismatch");
  TopologyDelta delta;
  const std::size_t n = drop_count(drop_fraction, mask.count());
  if (n == 0) return delta;

  const std::size_t cols = mask.cols();
  auto magnitude = [&](std::size_t flat) {
    return std::abs(weights(static_cast<Eigen::Index>(flat / cols), static_cast<Eigen::Index>(flat % cols)));
  };

  std::vector<std::size_t> candidates;
  candidates.reserve(mask.count());
  for (auto f : mask.existing())
    if (!std::binary_search(protected_positions.begin(), protected_positions.end(), f)) candidates.push_back(f);
  const std::size_t drop_n = std::min(n, candidates.size());
  auto less = [&](std::size_t a, std::size_t b) {
    const auto ma = magnitude(a), mb = magnitude(b);
    return ma < mb || (ma == mb && a < b);
  };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(drop_n), candidates.end(), less);
  delta.dropped.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(drop_n));

  // Growth draws only from positions vacant before this update.
  std::vector<std::size_t> vacant = mask.vacant();
  const std::size_t grow_n = std::min(drop_n, vacant.size());
  delta.growth_shortfall = drop_n - grow_n;
  for (std::size_t i = 0; i < grow_n; ++i) {
    const auto j = static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(i), static_cast<std::int64_t>(vacant.size() - 1)));
    std::swap(vacant[i], vacant[j]);
  }
  delta.grown.assign(vacant.begin(), vacant.begin() + static_cast<std::ptrdiff_t>(grow_n));
  std::sort(delta.grown.begin(), delta.grown.end());

  for (auto f : delta.dropped) mask.set_flat(f, false);
  for (auto f : delta.grown) mask.set_flat(f, true);
  for (auto f : delta.dropped) weights(static_cast<Eigen::Index>(f / cols), static_cast<Eigen::Index>(f % cols)) = S(0);
  for (auto f : delta.grown) weights(static_cast<Eigen::Index>(f / cols), static_cast<Eigen::Index>(f % cols)) = S(0);
  return delta;
}

// Mirror a delta computed on an online layer onto its target copy.
template <class S>
void apply_delta(nn::LayerParams<S>& layer, const TopologyDelta& delta) {
  if (!layer.mask) throw UsageError("apply_delta: layer has no mask");
  const std::size_t cols = layer.mask->cols();
  for (auto f : delta.dropped) layer.mask->set_flat(f, false);
  for (auto f : delta.grown) layer.mask->set_flat(f, true);
  for (auto f : delta.dropped) layer.weights(static_cast<Eigen::Index>(f / cols), static_cast<Eigen::Index>(f % cols)) = S(0);
  for (auto f : delta.grown) layer.weights(static_cast<Eigen::Index>(f / cols), static_cast<Eigen::Index>(f % cols)) = S(0);
}

// Zero Adam moments at every dropped and grown position of one layer.
template <class S>
void apply_delta_to_optimizer(const TopologyDelta& delta, nn::AdamState<S>& state, std::size_t layer) {
  nn::zero_moments(state, layer, delta.dropped);
  nn::zero_moments(state, layer, delta.grown);
}

// Column sums: number of existing outgoing connections per input neuron.
inline std::vector<std::int64_t> connections_per_input(const TopologyMask& mask) {
  std::vector<std::int64_t> counts(mask.cols(), 0);
  const auto& bits = mask.bits();
  for (std::size_t r = 0; r < mask.rows(); ++r)
    for (std::size_t c = 0; c < mask.cols(); ++c) counts[c] += bits[r * mask.cols() + c];
  return counts;
}

template <class S>
std::vector<std::int64_t> connections_per_input(const nn::LayerParams<S>& layer) {
  if (layer.mask) return connections_per_input(*layer.mask);
  return std::vector<std::int64_t>(layer.in_dim(), static_cast<std::int64_t>(layer.out_dim()));
}

}  // namespace anf::dst
