#pragma once

#include <cstdint>

#include "anf/error.hpp"
#include "anf/io/eigen_cereal.hpp"
#include "anf/nn/mlp.hpp"
#include "anf/rng.hpp"

namespace anf::agents {

template <class S>
struct Batch {
  nn::Matrix<S> state;       // [state_dim x n]
  nn::Matrix<S> action;      // [action_dim x n], policy range [-1, 1]
  nn::Matrix<S> reward;      // [1 x n]
  nn::Matrix<S> next_state;  // [state_dim x n]
  nn::Matrix<S> done;        // [1 x n], 1 where the next state is terminal
};

// Ring buffer of (s, a, r, s', done); columns are transitions.
template <class S>
class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  ReplayBuffer(std::size_t state_dim, std::size_t action_dim, std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
    const auto cap = static_cast<Eigen::Index>(capacity);
    states_.resize(static_cast<Eigen::Index>(state_dim), cap);
    next_states_.resize(static_cast<Eigen::Index>(state_dim), cap);
    actions_.resize(static_cast<Eigen::Index>(action_dim), cap);
    rewards_.resize(1, cap);
    dones_.resize(1, cap);
  }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t state_dim() const { return static_cast<std::size_t>(states_.rows()); }
  std::size_t action_dim() const { return static_cast<std::size_t>(actions_.rows()); }

  template <class StateVec, class ActionVec>
  void add(const StateVec& state, const ActionVec& action, double reward, const StateVec& next_state, bool done) {
    if (static_cast<std::size_t>(state.size()) != state_dim() || static_cast<std::size_t>(next_state.size()) != state_dim() ||
        static_cast<std::size_t>(action.size()) != action_dim())
      throw ConfigError("ReplayBuffer::add: transition shape mismatch");
    const auto i = static_cast<Eigen::Index>(next_);
    states_.col(i) = state.template cast<S>();
    actions_.col(i) = action.template cast<S>();
    rewards_(0, i) = static_cast<S>(reward);
    next_states_.col(i) = next_state.template cast<S>();
    dones_(0, i) = done ? S(1) : S(0);
    next_ = (next_ + 1) % capacity_;
    if (size_ < capacity_) ++size_;
  }

  // Uniform with replacement over stored transitions.
  Batch<S> sample(std::size_t n, Rng& rng) const {
    if (size_ == 0) throw UsageError("ReplayBuffer::sample: buffer is empty");
    Batch<S> b;
    const auto cols = static_cast<Eigen::Index>(n);
    b.state.resize(states_.rows(), cols);
    b.next_state.resize(states_.rows(), cols);
    b.action.resize(actions_.rows(), cols);
    b.reward.resize(1, cols);
    b.done.resize(1, cols);
    for (Eigen::Index k = 0; k < cols; ++k) {
      const auto i = static_cast<Eigen::Index>(rng.integer(0, static_cast<std::int64_t>(size_) - 1));
      b.state.col(k) = states_.col(i);
      b.next_state.col(k) = next_states_.col(i);
      b.action.col(k) = actions_.col(i);
      b.reward(0, k) = rewards_(0, i);
      b.done(0, k) = dones_(0, i);
    }
    return b;
  }

  bool operator==(const ReplayBuffer& o) const {
    return size_ == o.size_ && next_ == o.next_ && capacity_ == o.capacity_ &&
           states_.leftCols(size_) == o.states_.leftCols(size_) && actions_.leftCols(size_) == o.actions_.leftCols(size_) &&
           rewards_.leftCols(size_) == o.rewards_.leftCols(size_) &&
           next_states_.leftCols(size_) == o.next_states_.leftCols(size_) && dones_.leftCols(size_) == o.dones_.leftCols(size_);
  }

  template <class Archive>
  void serialize(Archive& ar) {
    ar(capacity_, size_, next_, states_, actions_, rewards_, next_states_, dones_);
  }

 private:
  std::size_t capacity_ = 0;
  std::size_t size_ = 0;
  std::size_t next_ = 0;
  nn::Matrix<S> states_, actions_, rewards_, next_states_, dones_;
};

}  // namespace anf::agents
