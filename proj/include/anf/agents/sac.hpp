#pragma once

#include <cereal/archives/binary.hpp>

#include "anf/agents/agent.hpp"
#include "anf/nn/gaussian.hpp"

namespace anf::agents {

// Soft actor-critic with a fixed temperature and a tanh-Gaussian policy.
// Only the critics have target copies.
template <class S>
class SacAgent final : public Agent<S> {
  using Base = Agent<S>;

 public:
  SacAgent(AgentConfig cfg, std::uint64_t seed) : Base(std::move(cfg), seed) {
    Rng init = Rng::derive(seed, 0x5ac);
    const auto& c = this->config_;
    actor_ = make_slot<S>("actor", this->net_spec(c.state_dim, 2 * c.action_dim), c, false, init);
    critic1_ = make_slot<S>("critic1", this->net_spec(c.state_dim + c.action_dim, 1), c, true, init);
    critic2_ = make_slot<S>("critic2", this->net_spec(c.state_dim + c.action_dim, 1), c, true, init);
  }

  std::vector<NetworkSlot<S>*> slots() override { return {&actor_, &critic1_, &critic2_}; }

  std::size_t action_dim() const { return this->config_.action_dim; }

  nn::Matrix<S> draw_noise(Eigen::Index rows, Eigen::Index cols, Rng& rng) const {
    nn::Matrix<S> xi(rows, cols);
    for (Eigen::Index k = 0; k < cols; ++k)
      for (Eigen::Index i = 0; i < rows; ++i) xi(i, k) = static_cast<S>(rng.normal());
    return xi;
  }

  // Policy sample for a batch of states with explicit noise.
  nn::SquashedGaussianBatch<S> sample_policy(const nn::Matrix<S>& states, const nn::Matrix<S>& noise,
                                             nn::ForwardCache<S>* cache = nullptr) const {
    const nn::Matrix<S> out = actor_.online.forward(states, cache);
    const auto a = static_cast<Eigen::Index>(action_dim());
    return nn::squashed_gaussian<S>(out.topRows(a), out.bottomRows(a), noise);
  }

  Eigen::VectorXd select_action(const Eigen::VectorXd& state, bool explore, Rng& rng) override {
    nn::Matrix<S> s = state.cast<S>();
    const auto a = static_cast<Eigen::Index>(action_dim());
    if (!explore) {
      const nn::Matrix<S> out = actor_.online.forward(s);
      return out.topRows(a).array().tanh().matrix().col(0).template cast<double>();
    }
    return sample_policy(s, draw_noise(a, 1, rng)).action.col(0).template cast<double>();
  }

  // y = r + gamma * (1 - done) * (min Q_target(s', a') - alpha * log pi(a'|s'))
  nn::Matrix<S> critic_target(const nn::Matrix<S>& reward, const nn::Matrix<S>& done, const nn::Matrix<S>& q_next_min,
                              const nn::Matrix<S>& next_log_prob) const {
    const S gamma = static_cast<S>(this->config_.hyper.gamma);
    const S alpha = static_cast<S>(this->config_.hyper.alpha);
    return reward + (gamma * (S(1) - done.array()) * (q_next_min.array() - alpha * next_log_prob.array())).matrix();
  }

  TrainDiagnostics train_step(const ReplayBuffer<S>& buffer, Rng& rng) override {
    const auto& h = this->config_.hyper;
    TrainDiagnostics diag;
    if (buffer.size() < h.batch_size) return diag;
    diag.trained = true;
    const auto b = buffer.sample(h.batch_size, rng);
    const auto n = b.state.cols();
    const auto a = static_cast<Eigen::Index>(action_dim());
    const S alpha = static_cast<S>(h.alpha);

    const auto next = sample_policy(b.next_state, draw_noise(a, n, rng));
    const nn::Matrix<S> next_in = stack_rows(b.next_state, next.action);
    const nn::Matrix<S> q_next = critic1_.target->forward(next_in).cwiseMin(critic2_.target->forward(next_in));
    const nn::Matrix<S> y = critic_target(b.reward, b.done, q_next, next.log_prob);

    const nn::Matrix<S> q_in = stack_rows(b.state, b.action);
    diag.critic_loss = this->update_critic(critic1_, q_in, y) + this->update_critic(critic2_, q_in, y);
    ++this->train_calls_;

    if (this->train_calls_ % h.actor_interval == 0) {
      nn::ForwardCache<S> actor_cache, c1_cache, c2_cache;
      const auto pi = sample_policy(b.state, draw_noise(a, n, rng), &actor_cache);
      const nn::Matrix<S> in = stack_rows(b.state, pi.action);
      const nn::Matrix<S> q1 = critic1_.online.forward(in, &c1_cache);
      const nn::Matrix<S> q2 = critic2_.online.forward(in, &c2_cache);
      const auto first = (q1.array() <= q2.array());
      const nn::Matrix<S> q_min = first.select(q1, q2);
      diag.actor_loss = static_cast<double>((alpha * pi.log_prob - q_min).mean());
      diag.mean_q = static_cast<double>(q_min.mean());

      const S inv_n = S(1) / static_cast<S>(n);
      const nn::Matrix<S> dq1 = first.select(nn::Matrix<S>::Constant(1, n, -inv_n), S(0));
      const nn::Matrix<S> dq2 = first.select(S(0), nn::Matrix<S>::Constant(1, n, -inv_n));
      nn::Matrix<S> d_in1, d_in2;
      critic1_.online.backward(c1_cache, dq1, &d_in1);
      critic2_.online.backward(c2_cache, dq2, &d_in2);
      const nn::Matrix<S> d_action = d_in1.bottomRows(a) + d_in2.bottomRows(a);
      const nn::Matrix<S> d_logp = nn::Matrix<S>::Constant(1, n, alpha * inv_n);
      auto [d_mean, d_log_std] = nn::squashed_gaussian_backward<S>(pi, d_action, d_logp);
      auto grads = actor_.online.backward(actor_cache, stack_rows(d_mean, d_log_std));
      nn::adam_step(actor_.optimizer, actor_.online, grads);
    }
    if (this->train_calls_ % h.target_interval == 0) {
      nn::polyak_update(*critic1_.target, critic1_.online, h.tau);
      nn::polyak_update(*critic2_.target, critic2_.online, h.tau);
    }
    return diag;
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
