#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <cereal/types/optional.hpp>
#include <cereal/types/string.hpp>
#include <cereal/types/vector.hpp>

#include "anf/agents/agent.hpp"
#include "anf/dst/set.hpp"

namespace anf::analytics {

// Average input-layer connection counts of one network over time, split into
// relevant and noise state features. Action inputs of critics belong to neither.
struct ConnectivityTimeline {
  std::string network;
  std::vector<std::int64_t> steps;
  std::vector<double> relevant_mean;
  std::vector<std::optional<double>> noise_mean;  // absent when every feature is relevant

  std::size_t size() const { return steps.size(); }

  bool operator==(const ConnectivityTimeline&) const = default;

  template <class Archive>
  void serialize(Archive& ar) {
    ar(network, steps, relevant_mean, noise_mean);
  }
};

struct NeuronSnapshot {
  std::int64_t step = 0;
  std::string network;
  std::vector<std::int64_t> counts;  // per input neuron (all columns of the input layer)
  std::vector<bool> relevant;        // per input neuron

  std::int64_t total() const {
    std::int64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
};

struct SplitMeans {
  double relevant = 0.0;
  std::optional<double> noise;
};

// Mean connection count over relevant vs other indices among the first
// state_dim columns.
inline SplitMeans split_means(const std::vector<std::int64_t>& counts, std::size_t state_dim,
                              const std::vector<std::size_t>& relevant_indices) {
  std::vector<bool> is_rel(state_dim, false);
  for (auto i : relevant_indices)
    if (i < state_dim) is_rel[i] = true;
  double rs = 0, ns = 0;
  std::size_t rc = 0, nc = 0;
  for (std::size_t j = 0; j < state_dim; ++j) {
    if (is_rel[j]) {
      rs += static_cast<double>(counts[j]);
      ++rc;
    } else {
      ns += static_cast<double>(counts[j]);
      ++nc;
    }
  }
  SplitMeans m;
  m.relevant = rc ? rs / static_cast<double>(rc) : 0.0;
  if (nc) m.noise = ns / static_cast<double>(nc);
  return m;
}

// Appends one sample per tracked network (actor, critic1, critic2) whose
// input layer is sparse. Returns false, touching nothing, for dense agents.
template <class S>
bool record_connectivity(const agents::Agent<S>& agent, std::int64_t step, const std::vector<std::size_t>& relevant_indices,
                         std::vector<ConnectivityTimeline>& timelines) {
  const auto slots = agent.slots();
  bool any = false;
  for (const auto* slot : slots) any = any || slot->online.layer(0).mask.has_value();
  if (!any) return false;
  const std::size_t state_dim = agent.config().state_dim;
  for (const auto* slot : slots) {
    const auto& L = slot->online.layer(0);
    if (!L.mask) continue;
    auto it = std::find_if(timelines.begin(), timelines.end(), [&](const auto& t) { return t.network == slot->tag; });
    if (it == timelines.end()) {
      timelines.push_back(ConnectivityTimeline{slot->tag, {}, {}, {}});
      it = std::prev(timelines.end());
    }
    const auto m = split_means(dst::connections_per_input(L), state_dim, relevant_indices);
    it->steps.push_back(step);
    it->relevant_mean.push_back(m.relevant);
    it->noise_mean.push_back(m.noise);
  }
  return true;
}

template <class S>
NeuronSnapshot snapshot_neurons(const agents::Agent<S>& agent, std::int64_t step, const std::vector<std::size_t>& relevant_indices,
                                const std::string& network = "actor") {
  const auto& L = agent.slot(network).online.layer(0);
  NeuronSnapshot snap;
  snap.step = step;
  snap.network = network;
  snap.counts = dst::connections_per_input(L);
  snap.relevant.assign(snap.counts.size(), false);
  for (auto i : relevant_indices)
    if (i < snap.relevant.size()) snap.relevant[i] = true;
  return snap;
}

// Indices of the k input neurons with the most connections (ties: lower index).
inline std::vector<std::size_t> top_k_neurons(const NeuronSnapshot& snap, std::size_t k) {
  std::vector<std::size_t> idx(snap.counts.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return snap.counts[a] > snap.counts[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

}  // namespace anf::analytics
