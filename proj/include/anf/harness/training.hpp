#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <cereal/archives/binary.hpp>

#include "anf/agents/factory.hpp"
#include "anf/analytics/connectivity.hpp"
#include "anf/dst/sparsity.hpp"
#include "anf/env/ene.hpp"
#include "anf/env/toy_envs.hpp"
#include "anf/fp_mode.hpp"
#include "anf/harness/config.hpp"
#include "anf/harness/metrics.hpp"

namespace anf::harness {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// One (config, seed) training run: collect, train every k_c steps, update the
// topology every period, evaluate periodically. Every source of randomness is
// a member so the whole run can be checkpointed and resumed bit-exactly.
template <class S>
class TrainingSession {
 public:
  TrainingSession(ExperimentConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)),
        seed_(seed),
        train_env_(env::make_builtin_env(cfg_.env, cfg_.horizon), cfg_.ene, Rng::derive(seed, 1)),
        eval_env_(env::make_builtin_env(cfg_.env, cfg_.horizon), cfg_.ene, Rng::derive(seed, 2)),
        reset_rng_(Rng::derive(seed, 3)),
        eval_reset_rng_(Rng::derive(seed, 4)),
        action_rng_(Rng::derive(seed, 5)),
        train_rng_(Rng::derive(seed, 6)) {
    cfg_.validate();
    agent_cfg_ = cfg_.agent_config();
    agent_ = agents::make_agent<S>(agent_cfg_, seed);
    buffer_ = agents::ReplayBuffer<S>(train_env_.state_dim(), train_env_.action_dim(), cfg_.run.buffer_capacity);
    if (cfg_.pene.enabled)
      schedule_ = env::PermutationSchedule(train_env_.state_dim(), cfg_.effective_pene_period(), Rng::derive(seed, 7).bits());
    log_.original_dim = train_env_.original_dim();
    log_.state_dim = train_env_.state_dim();
    log_.total_steps = cfg_.run.total_steps;
    obs_ = observe(train_env_.reset(reset_rng_), 0);
    record_topology();
  }

  const ExperimentConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  std::int64_t step() const { return t_; }
  bool finished() const { return t_ >= cfg_.run.total_steps; }
  const MetricsLog& log() const { return log_; }
  const agents::Agent<S>& agent() const { return *agent_; }
  const agents::ReplayBuffer<S>& buffer() const { return buffer_; }
  std::int64_t gradient_steps() const { return gradient_steps_; }
  const std::vector<Eigen::VectorXd>& action_trace() const { return action_trace_; }
  void set_trace_actions(bool on) { trace_actions_ = on; }

  // Indices of the original features in the observation at env step t.
  std::vector<std::size_t> relevant_indices(std::int64_t t) const {
    const auto d_og = train_env_.original_dim();
    if (schedule_) return schedule_->relevant_positions(schedule_step(t), d_og);
    std::vector<std::size_t> r(d_og);
    for (std::size_t i = 0; i < d_og; ++i) r[i] = i;
    return r;
  }

  // Advance to env step `until` (clamped to the configured total).
  void run(std::optional<std::int64_t> until = std::nullopt, const std::string& checkpoint_path = "") {
    FlushDenormalsGuard ftz;
    const auto end = std::min(until.value_or(cfg_.run.total_steps), cfg_.run.total_steps);
    while (t_ < end) {
      advance();
      if (!checkpoint_path.empty() && cfg_.run.checkpoint_interval > 0 && t_ % cfg_.run.checkpoint_interval == 0)
        save_checkpoint(checkpoint_path);
    }
    finalize();
  }

  double evaluate() {
    double total = 0.0;
    Rng unused(0);
    for (int ep = 0; ep < cfg_.run.eval_episodes; ++ep) {
      auto s = observe(eval_env_.reset(eval_reset_rng_), t_);
      double ret = 0.0;
      for (;;) {
        const auto a = agent_->select_action(s, false, unused);
        auto r = eval_env_.step(to_env_action(a));
        ret += r.reward;
        s = observe(r.state, t_);
        if (r.done()) break;
      }
      total += ret;
    }
    return total / cfg_.run.eval_episodes;
  }

  void save_checkpoint(const std::string& path) const {
    std::ostringstream agent_blob, train_env_blob, eval_env_blob;
    agent_->save(agent_blob);
    train_env_.save_state(train_env_blob);
    eval_env_.save_state(eval_env_blob);
    const auto tmp = path + ".tmp";
    {
      std::ofstream os(tmp, std::ios::binary);
      if (!os) throw IoError("cannot write checkpoint " + tmp);
      cereal::BinaryOutputArchive ar(os);
      ar(kCheckpointVersion, config_hash(cfg_), seed_, t_, gradient_steps_, obs_, reset_rng_, eval_reset_rng_, action_rng_,
         train_rng_, buffer_, log_, loss_sum_, actor_loss_sum_, loss_count_, actor_loss_count_, agent_blob.str(),
         train_env_blob.str(), eval_env_blob.str());
      if (!os) throw IoError("write failed for checkpoint " + tmp);
    }
    std::filesystem::rename(tmp, path);
  }

  void load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read checkpoint " + path);
    try {
      cereal::BinaryInputArchive ar(is);
      std::uint32_t version = 0;
      std::uint64_t hash = 0, seed = 0;
      ar(version, hash, seed);
      if (version != kCheckpointVersion) throw IoError("checkpoint version mismatch in " + path);
      if (hash != config_hash(cfg_) || seed != seed_) throw ConfigError("checkpoint " + path + " belongs to a different config or seed");
      std::string agent_blob, train_env_blob, eval_env_blob;
      ar(t_, gradient_steps_, obs_, reset_rng_, eval_reset_rng_, action_rng_, train_rng_, buffer_, log_, loss_sum_,
         actor_loss_sum_, loss_count_, actor_loss_count_, agent_blob, train_env_blob, eval_env_blob);
      std::istringstream a(agent_blob), te(train_env_blob), ee(eval_env_blob);
      agent_->load(a);
      train_env_.load_state(te);
      eval_env_.load_state(ee);
    } catch (const cereal::Exception& e) {
      throw IoError("corrupt checkpoint " + path + ": " + e.what());
    }
  }

 private:
  // The state reached by the final step belongs to the last sub-environment.
  std::int64_t schedule_step(std::int64_t t) const { return std::min(t, std::max<std::int64_t>(cfg_.run.total_steps - 1, 0)); }
  env::State observe(const env::State& raw, std::int64_t t) const {
    return schedule_ ? schedule_->apply(schedule_step(t), raw) : raw;
  }

  env::Action to_env_action(const Eigen::VectorXd& a) const {
    const auto lo = train_env_.action_low(), hi = train_env_.action_high();
    return lo.array() + (a.array() + 1.0) * 0.5 * (hi - lo).array();
  }

  void advance() {
    ++t_;
    Eigen::VectorXd a;
    if (t_ <= cfg_.run.initial_collect) {
      a.resize(static_cast<Eigen::Index>(train_env_.action_dim()));
      for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = action_rng_.uniform(-1.0, 1.0);
    } else {
      a = agent_->select_action(obs_, true, action_rng_);
    }
    if (trace_actions_) action_trace_.push_back(a);
    auto r = train_env_.step(to_env_action(a));
    auto next = observe(r.state, t_);
    buffer_.add(obs_, a, r.reward, next, r.terminated);
    obs_ = r.done() ? observe(train_env_.reset(reset_rng_), t_) : std::move(next);

    if (t_ > cfg_.run.initial_collect && t_ % agent_cfg_.hyper.critic_interval == 0) {
      const auto diag = agent_->train_step(buffer_, train_rng_);
      if (diag.trained) {
        ++gradient_steps_;
        if (!std::isfinite(diag.critic_loss) || (diag.actor_loss && !std::isfinite(*diag.actor_loss)))
          throw NumericalError("non-finite loss at env step " + std::to_string(t_) + " (critic " +
                               format_double(diag.critic_loss) + ")");
        loss_sum_ += diag.critic_loss;
        ++loss_count_;
        if (diag.actor_loss) {
          actor_loss_sum_ += *diag.actor_loss;
          ++actor_loss_count_;
        }
      }
    }
    if (gradient_steps_ > 0) agent_->maybe_evolve_topology(t_);
    if (t_ % agent_cfg_.sparsity.topology_period == 0) record_topology();
    if (t_ % cfg_.run.eval_interval == 0) {
      EvalRecord e;
      e.step = t_;
      e.mean_return = evaluate();
      e.gradient_steps = gradient_steps_;
      e.critic_loss = loss_count_ ? loss_sum_ / static_cast<double>(loss_count_) : 0.0;
      e.actor_loss = actor_loss_count_ ? actor_loss_sum_ / static_cast<double>(actor_loss_count_) : 0.0;
      e.actor_global_sparsity = dst::global_sparsity(agent_->actor());
      loss_sum_ = actor_loss_sum_ = 0.0;
      loss_count_ = actor_loss_count_ = 0;
      log_.evals.push_back(e);
    }
  }

  void record_topology() {
    if (!cfg_.run.record_connectivity) return;
    const auto rel = relevant_indices(t_);
    if (!analytics::record_connectivity(*agent_, t_, rel, log_.connectivity)) return;
    log_.snapshot_steps.push_back(t_);
    log_.actor_input_counts.push_back(dst::connections_per_input(agent_->actor().layer(0)));
    log_.relevant_indices.push_back(rel);
  }

  void finalize() {
    log_.actor_params = agent_->actor().existing_weights();
    log_.final_actor_global_sparsity = dst::global_sparsity(agent_->actor());
  }

  ExperimentConfig cfg_;
  agents::AgentConfig agent_cfg_;
  std::uint64_t seed_;
  env::EneEnv train_env_, eval_env_;
  std::optional<env::PermutationSchedule> schedule_;
  Rng reset_rng_, eval_reset_rng_, action_rng_, train_rng_;
  std::unique_ptr<agents::Agent<S>> agent_;
  agents::ReplayBuffer<S> buffer_;
  MetricsLog log_;
  env::State obs_;
  std::int64_t t_ = 0;
  std::int64_t gradient_steps_ = 0;
  double loss_sum_ = 0.0, actor_loss_sum_ = 0.0;
  std::int64_t loss_count_ = 0, actor_loss_count_ = 0;
  bool trace_actions_ = false;
  std::vector<Eigen::VectorXd> action_trace_;
};

// Precision used for experiment runs.
using Real = float;

inline MetricsLog run_training(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrainingSession<Real> session(cfg, seed);
  session.run();
  return session.log();
}

}  // namespace anf::harness
