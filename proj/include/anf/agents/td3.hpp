#pragma once

#include <cereal/archives/binary.hpp>

#include "anf/agents/agent.hpp"

namespace anf::agents {

// Twin delayed DDPG: target policy smoothing, clipped double-Q targets,
// delayed actor and target updates.
template <class S>
class Td3Agent final : public Agent<S> {
  using Base = Agent<S>;

 public:
  Td3Agent(AgentConfig cfg, std::uint64_t seed) : Base(std::move(cfg), seed) {
    Rng init = Rng::derive(seed, 0x1417);
    const auto& c = this->config_;
    actor_ = make_slot<S>("actor", this->net_spec(c.state_dim, c.action_dim), c, true, init);
    critic1_ = make_slot<S>("critic1", this->net_spec(c.state_dim + c.action_dim, 1), c, true, init);
    critic2_ = make_slot<S>("critic2", this->net_spec(c.state_dim + c.action_dim, 1), c, true, init);
  }

  std::vector<NetworkSlot<S>*> slots() override { return {&actor_, &critic1_, &critic2_}; }

  nn::Matrix<S> policy(const nn::Mlp<S>& net, const nn::Matrix<S>& states) const {
    return net.forward(states).array().tanh().matrix();
  }

  Eigen::VectorXd select_action(const Eigen::VectorXd& state, bool explore, Rng& rng) override {
    nn::Matrix<S> s = state.cast<S>();
    Eigen::VectorXd a = policy(actor_.online, s).col(0).template cast<double>();
    if (explore) {
      for (Eigen::Index i = 0; i < a.size(); ++i)
        a(i) = std::clamp(a(i) + rng.normal(0.0, this->config_.hyper.exploration_noise), -1.0, 1.0);
    }
    return a;
  }

  TrainDiagnostics train_step(const ReplayBuffer<S>& buffer, Rng& rng) override {
    const auto& h = this->config_.hyper;
    TrainDiagnostics diag;
    if (buffer.size() < h.batch_size) return diag;
    diag.trained = true;
    const auto b = buffer.sample(h.batch_size, rng);
    const auto n = b.state.cols();

    // Smoothed target action and clipped double-Q target.
    nn::Matrix<S> next_action = policy(*actor_.target, b.next_state);
    for (Eigen::Index k = 0; k < n; ++k)
      for (Eigen::Index i = 0; i < next_action.rows(); ++i) {
        const double eps = std::clamp(rng.normal(0.0, h.target_noise), -h.target_noise_clip, h.target_noise_clip);
        next_action(i, k) = std::clamp(next_action(i, k) + static_cast<S>(eps), S(-1), S(1));
      }
    const nn::Matrix<S> next_in = stack_rows(b.next_state, next_action);
    const nn::Matrix<S> q_next = critic1_.target->forward(next_in).cwiseMin(critic2_.target->forward(next_in));
    const nn::Matrix<S> y = critic_target(b.reward, b.done, q_next);

    const nn::Matrix<S> q_in = stack_rows(b.state, b.action);
    diag.critic_loss = this->update_critic(critic1_, q_in, y) + this->update_critic(critic2_, q_in, y);
    ++this->train_calls_;

    if (this->train_calls_ % h.actor_interval == 0) {
      nn::ForwardCache<S> actor_cache, critic_cache;
      const nn::Matrix<S> action = actor_.online.forward(b.state, &actor_cache).array().tanh().matrix();
      const nn::Matrix<S> q = critic1_.online.forward(stack_rows(b.state, action), &critic_cache);
      diag.actor_loss = -static_cast<double>(q.mean());
      diag.mean_q = static_cast<double>(q.mean());
      nn::Matrix<S> d_input;
      const nn::Matrix<S> dq = nn::Matrix<S>::Constant(1, n, S(-1) / static_cast<S>(n));
      critic1_.online.backward(critic_cache, dq, &d_input);
      const nn::Matrix<S> d_pre =
          d_input.bottomRows(action.rows()).cwiseProduct((S(1) - action.array().square()).matrix());
      auto grads = actor_.online.backward(actor_cache, d_pre);
      nn::adam_step(actor_.optimizer, actor_.online, grads);
    }
    if (this->train_calls_ % h.target_interval == 0) {
      for (auto* slot : slots()) nn::polyak_update(*slot->target, slot->online, h.tau);
    }
    return diag;
  }

  // y = r + gamma * (1 - done) * q_next
  nn::Matrix<S> critic_target(const nn::Matrix<S>& reward, const nn::Matrix<S>& done, const nn::Matrix<S>& q_next) const {
    const S gamma = static_cast<S>(this->config_.hyper.gamma);
    return reward + (gamma * (S(1) - done.array()) * q_next.array()).matrix();
  }

  void save(std::ostream& os) const override {
    cereal::BinaryOutputArchive ar(os);
    ar(this->topology_rng_, this->train_calls_, actor_, critic1_, critic2_);
  }
  void load(std::istream& is) override {
    cereal::BinaryInputArchive ar(is);
    ar(this->topology_rng_, this->train_calls_, actor_, critic1_, critic2_);
  }

 private:
  NetworkSlot<S> actor_, critic1_, critic2_;
};

}  // namespace anf::agents
