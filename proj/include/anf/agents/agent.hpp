#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <cereal/types/string.hpp>
#include <cereal/types/vector.hpp>

#include "anf/agents/replay_buffer.hpp"
#include "anf/dst/set.hpp"
#include "anf/dst/sparsity.hpp"
#include "anf/nn/adam.hpp"
#include "anf/nn/mlp.hpp"

namespace anf::agents {

enum class Algorithm { td3, sac };

// How the networks are sparsified.
enum class Variant { dense, anf, static_anf, sparser_anf };

inline std::string to_string(Algorithm a) { return a == Algorithm::td3 ? "td3" : "sac"; }
inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::dense: return "dense";
    case Variant::anf: return "anf";
    case Variant::static_anf: return "static_anf";
    case Variant::sparser_anf: return "sparser_anf";
  }
  return "?";
}

struct AgentHyperparams {
  double gamma = 0.99;
  double tau = 0.005;
  double lr = 1e-3;
  double weight_decay = 2e-4;
  std::size_t batch_size = 100;
  std::int64_t critic_interval = 1;  // k_c, env steps between train calls
  std::int64_t actor_interval = 2;   // k_a, in train calls
  std::int64_t target_interval = 2;  // k_tar, in train calls
  double alpha = 0.2;                // SAC temperature (fixed)
  double exploration_noise = 0.1;    // TD3
  double target_noise = 0.2;         // TD3
  double target_noise_clip = 0.5;    // TD3
  std::vector<std::size_t> hidden{256, 256};

  static AgentHyperparams defaults(Algorithm a) {
    AgentHyperparams h;
    if (a == Algorithm::sac) {
      h.actor_interval = 1;
      h.target_interval = 1;
    }
    return h;
  }

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("agent.gamma must be in [0, 1]");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("agent.tau must be in (0, 1]");
    if (!(lr > 0.0)) throw ConfigError("agent.lr must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("agent.weight_decay must be non-negative");
    if (batch_size == 0) throw ConfigError("agent.batch_size must be positive");
    if (critic_interval <= 0 || actor_interval <= 0 || target_interval <= 0)
      throw ConfigError("agent intervals must be positive");
    if (!(alpha >= 0.0)) throw ConfigError("agent.alpha must be non-negative");
    if (!(exploration_noise >= 0.0 && target_noise >= 0.0 && target_noise_clip >= 0.0))
      throw ConfigError("agent noise parameters must be non-negative");
    if (hidden.empty()) throw ConfigError("agent.hidden needs at least one layer");
  }

  template <class Archive>
  void serialize(Archive& ar) {
    ar(gamma, tau, lr, weight_decay, batch_size, critic_interval, actor_interval, target_interval, alpha,
       exploration_noise, target_noise, target_noise_clip, hidden);
  }
};

struct AgentConfig {
  Algorithm algorithm = Algorithm::td3;
  Variant variant = Variant::anf;
  AgentHyperparams hyper = AgentHyperparams::defaults(Algorithm::td3);
  dst::SparsityConfig sparsity;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;

  void validate() const {
    hyper.validate();
    sparsity.validate();
    if (state_dim == 0 || action_dim == 0) throw ConfigError("agent: state and action dims must be positive");
    if (variant == Variant::sparser_anf && !sparsity.global_sparsity)
      throw ConfigError("sparser_anf needs sparsity.global_sparsity");
  }
};

struct TrainDiagnostics {
  bool trained = false;  // false when the buffer held fewer than n transitions
  double critic_loss = 0.0;
  std::optional<double> actor_loss;
  double mean_q = 0.0;
};

// Per-layer sparsity levels implied by the variant for a network shape.
inline std::vector<double> layer_sparsities(const AgentConfig& cfg, const nn::MlpSpec& spec) {
  std::vector<double> s(spec.num_layers(), 0.0);
  switch (cfg.variant) {
    case Variant::dense: break;
    case Variant::anf:
    case Variant::static_anf: s[0] = cfg.sparsity.input_layer_sparsity; break;
    case Variant::sparser_anf:
      s = dst::uniform_allocation(*cfg.sparsity.global_sparsity, dst::layer_shapes(spec), true);
      break;
  }
  return s;
}

inline bool topology_is_dynamic(const AgentConfig& cfg) {
  return (cfg.variant == Variant::anf || cfg.variant == Variant::sparser_anf) &&
         cfg.sparsity.mode == dst::TopologyMode::dynamic;
}

template <class S>
void sparsify(nn::Mlp<S>& net, const std::vector<double>& sparsity, Rng& rng) {
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    if (sparsity[i] <= 0.0) continue;
    const auto& L = net.layer(i);
    net.set_mask(i, dst::init_mask(L.out_dim(), L.in_dim(), sparsity[i], rng));
  }
}

// A trainable network, its optional target copy and its optimizer.
template <class S>
struct NetworkSlot {
  std::string tag;
  nn::Mlp<S> online;
  std::optional<nn::Mlp<S>> target;
  nn::AdamState<S> optimizer;
  std::vector<std::vector<std::size_t>> last_grown;  // per layer, from the previous update

  template <class Archive>
  void serialize(Archive& ar) {
    ar(tag, online, target, optimizer, last_grown);
  }
};

template <class S>
NetworkSlot<S> make_slot(std::string tag, const nn::MlpSpec& spec, const AgentConfig& cfg, bool with_target, Rng& rng) {
  NetworkSlot<S> slot;
  slot.tag = std::move(tag);
  slot.online = nn::Mlp<S>(spec, rng);
  sparsify(slot.online, layer_sparsities(cfg, spec), rng);
  if (with_target) slot.target = slot.online;
  slot.optimizer = nn::AdamState<S>(slot.online, nn::AdamConfig{cfg.hyper.lr, cfg.hyper.weight_decay});
  slot.last_grown.assign(spec.num_layers(), {});
  return slot;
}

struct LayerDelta {
  std::string network;
  std::size_t layer = 0;
  dst::TopologyDelta delta;
};

// One SET update on every masked layer of the slot; mirrored onto the
// target and the optimizer moments.
template <class S>
std::vector<LayerDelta> evolve_slot(NetworkSlot<S>& slot, const dst::SparsityConfig& cfg, std::int64_t step, Rng& rng) {
  std::vector<LayerDelta> out;
  for (std::size_t i = 0; i < slot.online.num_layers(); ++i) {
    if (!slot.online.layer(i).mask) continue;
    auto& L = slot.online.mutable_layer(i);
    std::span<const std::size_t> protect;
    if (cfg.protect_new_growth) protect = slot.last_grown[i];
    auto delta = dst::evolve(*L.mask, L.weights, cfg.drop_fraction, rng, protect);
    delta.step = step;
    if (slot.target) dst::apply_delta(slot.target->mutable_layer(i), delta);
    dst::apply_delta_to_optimizer(delta, slot.optimizer, i);
    slot.last_grown[i] = delta.grown;
    out.push_back({slot.tag, i, std::move(delta)});
  }
  return out;
}

template <class S>
nn::Matrix<S> stack_rows(const nn::Matrix<S>& top, const nn::Matrix<S>& bottom) {
  nn::Matrix<S> out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

// Actor-critic agent with twin critics. Actions are in [-1, 1]^action_dim.
template <class S>
class Agent {
 public:
  virtual ~Agent() = default;

  const AgentConfig& config() const { return config_; }

  virtual Eigen::VectorXd select_action(const Eigen::VectorXd& state, bool explore, Rng& rng) = 0;
  virtual TrainDiagnostics train_step(const ReplayBuffer<S>& buffer, Rng& rng) = 0;

  // Topology update at multiples of the topology period (dynamic variants only).
  std::vector<LayerDelta> maybe_evolve_topology(std::int64_t env_step) {
    if (!topology_is_dynamic(config_) || env_step <= 0 || env_step % config_.sparsity.topology_period != 0) return {};
    std::vector<LayerDelta> all;
    for (auto* slot : slots()) {
      auto d = evolve_slot(*slot, config_.sparsity, env_step, topology_rng_);
      all.insert(all.end(), std::make_move_iterator(d.begin()), std::make_move_iterator(d.end()));
    }
    return all;
  }

  virtual std::vector<NetworkSlot<S>*> slots() = 0;
  std::vector<const NetworkSlot<S>*> slots() const {
    auto s = const_cast<Agent*>(this)->slots();
    return {s.begin(), s.end()};
  }

  const NetworkSlot<S>& slot(const std::string& tag) const {
    for (auto* s : slots())
      if (s->tag == tag) return *s;
    throw UsageError("no network tagged " + tag);
  }

  const nn::Mlp<S>& actor() const { return slot("actor").online; }

  std::int64_t train_calls() const { return train_calls_; }

  virtual void save(std::ostream& os) const = 0;
  virtual void load(std::istream& is) = 0;

 protected:
  explicit Agent(AgentConfig cfg, std::uint64_t seed) : config_(std::move(cfg)), topology_rng_(Rng::derive(seed, 0x70b0)) {
    config_.validate();
  }

  nn::MlpSpec net_spec(std::size_t in, std::size_t out) const {
    nn::MlpSpec s;
    s.input_dim = in;
    s.hidden_dims = config_.hyper.hidden;
    s.output_dim = out;
    return s;
  }

  // Standard MSE regression of one critic towards y; returns the loss.
  double update_critic(NetworkSlot<S>& slot, const nn::Matrix<S>& input, const nn::Matrix<S>& y) {
    nn::ForwardCache<S> cache;
    const nn::Matrix<S> q = slot.online.forward(input, &cache);
    const nn::Matrix<S> diff = q - y;
    const auto n = static_cast<S>(q.cols());
    const double loss = static_cast<double>(diff.squaredNorm() / n);
    const nn::Matrix<S> dq = (S(2) / n) * diff;
    auto grads = slot.online.backward(cache, dq);
    nn::adam_step(slot.optimizer, slot.online, grads);
    return loss;
  }

  AgentConfig config_;
  Rng topology_rng_;
  std::int64_t train_calls_ = 0;
};

}  // namespace anf::agents
