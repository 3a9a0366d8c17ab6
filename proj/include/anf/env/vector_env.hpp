#pragma once

#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

#include <Eigen/Core>

#include "anf/rng.hpp"

namespace anf::env {

using State = Eigen::VectorXd;
using Action = Eigen::VectorXd;

struct StepResult {
  State state;
  double reward = 0.0;
  bool terminated = false;  // true terminal state: no bootstrapping past it
  bool truncated = false;   // time limit reached

  bool done() const { return terminated || truncated; }
};

// Vector-state continuous-control task. Actions are given in env units,
// within [action_low, action_high] per dimension.
class VectorEnv {
 public:
  virtual ~VectorEnv() = default;

  virtual std::string name() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual Eigen::VectorXd action_low() const = 0;
  virtual Eigen::VectorXd action_high() const = 0;
  virtual std::int64_t horizon() const = 0;

  virtual State reset(Rng& rng) = 0;
  virtual StepResult step(const Action& action) = 0;

  // Hand-written reference controller on the original state, if one exists.
  virtual std::optional<Action> scripted_action(const State&) const { return std::nullopt; }

  virtual std::unique_ptr<VectorEnv> clone() const = 0;

  // Exact dynamic state for checkpoints.
  virtual void save_state(std::ostream& os) const = 0;
  virtual void load_state(std::istream& is) = 0;
};

}  // namespace anf::env
