#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <cereal/archives/binary.hpp>
#include <cereal/types/array.hpp>
#include <cereal/types/vector.hpp>

#include "anf/env/vector_env.hpp"
#include "anf/error.hpp"
#include "anf/io/eigen_cereal.hpp"

namespace anf::env {

namespace detail {

inline double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

// Shaped reach reward: 1 at the target, decaying with distance, minus a
// small control cost. Always within [-ctrl_cost, 1].
inline double reach_reward(double distance, const Action& a, double ctrl_cost) {
  double a2 = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double ai = clamp_unit(a(i));
    a2 += ai * ai;
  }
  return 1.0 - std::tanh(2.0 * distance) - ctrl_cost * a2 / static_cast<double>(a.size());
}

}  // namespace detail

// Planar point mass pushed toward a goal that jumps to a new random spot
// every kGoalPeriod steps.
// State (8): position(2), velocity(2), goal(2), goal - position(2).
class PointMassReach final : public VectorEnv {
 public:
  static constexpr double kDt = 0.1;
  static constexpr double kDamping = 0.1;
  static constexpr double kGain = 2.0;
  static constexpr double kBound = 2.0;
  static constexpr double kCtrlCost = 0.05;
  static constexpr std::int64_t kGoalPeriod = 30;

  explicit PointMassReach(std::int64_t horizon = 150) : horizon_(horizon) {}

  std::string name() const override { return "point_mass_reach"; }
  std::size_t state_dim() const override { return 8; }
  std::size_t action_dim() const override { return 2; }
  Eigen::VectorXd action_low() const override { return Eigen::VectorXd::Constant(2, -1.0); }
  Eigen::VectorXd action_high() const override { return Eigen::VectorXd::Constant(2, 1.0); }
  std::int64_t horizon() const override { return horizon_; }

  State reset(Rng& rng) override {
    for (int i = 0; i < 2; ++i) {
      pos_[i] = rng.uniform(-1.0, 1.0);
      vel_[i] = 0.0;
    }
    goals_.resize(2 * static_cast<std::size_t>(horizon_ / kGoalPeriod + 1));
    for (auto& g : goals_) g = rng.uniform(-1.0, 1.0);
    t_ = 0;
    update_goal();
    return observe();
  }

  StepResult step(const Action& action) override {
    for (int i = 0; i < 2; ++i) {
      const double a = detail::clamp_unit(action(i));
      vel_[i] = (1.0 - kDamping) * vel_[i] + kDt * kGain * a;
      pos_[i] += kDt * vel_[i];
      if (std::abs(pos_[i]) > kBound) {
        pos_[i] = std::copysign(kBound, pos_[i]);
        vel_[i] = 0.0;
      }
    }
    const double dist = std::hypot(goal_[0] - pos_[0], goal_[1] - pos_[1]);
    ++t_;
    update_goal();
    StepResult r;
    r.state = observe();
    r.reward = detail::reach_reward(dist, action, kCtrlCost);
    r.truncated = t_ >= horizon_;
    return r;
  }

  std::optional<Action> scripted_action(const State& s) const override {
    Action a(2);
    for (int i = 0; i < 2; ++i) a(i) = detail::clamp_unit(3.0 * s(6 + i) - 1.5 * s(2 + i));
    return a;
  }

  std::unique_ptr<VectorEnv> clone() const override { return std::make_unique<PointMassReach>(*this); }

  void save_state(std::ostream& os) const override {
    cereal::BinaryOutputArchive ar(os);
    ar(pos_, vel_, goal_, goals_, t_);
  }
  void load_state(std::istream& is) override {
    cereal::BinaryInputArchive ar(is);
    ar(pos_, vel_, goal_, goals_, t_);
  }

 private:
  void update_goal() {
    const auto k = 2 * static_cast<std::size_t>(t_ / kGoalPeriod);
    if (k + 1 < goals_.size()) goal_ = {goals_[k], goals_[k + 1]};
  }

  State observe() const {
    State s(8);
    s << pos_[0], pos_[1], vel_[0], vel_[1], goal_[0], goal_[1], goal_[0] - pos_[0], goal_[1] - pos_[1];
    return s;
  }

  std::int64_t horizon_;
  std::array<double, 2> pos_{}, vel_{}, goal_{};
  std::vector<double> goals_;
  std::int64_t t_ = 0;
};

// Damped 3-D double integrator following a reference on a slow Lissajous path.
// State (12): position(3), velocity(3), reference(3), reference - position(3).
class LinearTracker final : public VectorEnv {
 public:
  static constexpr double kDt = 0.1;
  static constexpr double kDamping = 0.1;
  static constexpr double kGain = 2.0;
  static constexpr double kOmega = 0.25;
  static constexpr double kCtrlCost = 0.05;

  explicit LinearTracker(std::int64_t horizon = 150) : horizon_(horizon) {}

  std::string name() const override { return "linear_tracker"; }
  std::size_t state_dim() const override { return 12; }
  std::size_t action_dim() const override { return 3; }
  Eigen::VectorXd action_low() const override { return Eigen::VectorXd::Constant(3, -1.0); }
  Eigen::VectorXd action_high() const override { return Eigen::VectorXd::Constant(3, 1.0); }
  std::int64_t horizon() const override { return horizon_; }

  State reset(Rng& rng) override {
    for (int i = 0; i < 3; ++i) {
      pos_[i] = rng.uniform(-1.0, 1.0);
      vel_[i] = 0.0;
      center_[i] = rng.uniform(-0.5, 0.5);
      phase_[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    t_ = 0;
    return observe();
  }

  StepResult step(const Action& action) override {
    for (int i = 0; i < 3; ++i) {
      const double a = detail::clamp_unit(action(i));
      vel_[i] = (1.0 - kDamping) * vel_[i] + kDt * kGain * a;
      pos_[i] = std::clamp(pos_[i] + kDt * vel_[i], -3.0, 3.0);
    }
    ++t_;
    const auto ref = reference();
    double d2 = 0.0;
    for (int i = 0; i < 3; ++i) d2 += (ref[i] - pos_[i]) * (ref[i] - pos_[i]);
    StepResult r;
    r.state = observe();
    r.reward = detail::reach_reward(std::sqrt(d2), action, kCtrlCost);
    r.truncated = t_ >= horizon_;
    return r;
  }

  std::optional<Action> scripted_action(const State& s) const override {
    Action a(3);
    for (int i = 0; i < 3; ++i) a(i) = detail::clamp_unit(3.0 * s(9 + i) - 1.5 * s(3 + i));
    return a;
  }

  std::unique_ptr<VectorEnv> clone() const override { return std::make_unique<LinearTracker>(*this); }

  void save_state(std::ostream& os) const override {
    cereal::BinaryOutputArchive ar(os);
    ar(pos_, vel_, center_, phase_, t_);
  }
  void load_state(std::istream& is) override {
    cereal::BinaryInputArchive ar(is);
    ar(pos_, vel_, center_, phase_, t_);
  }

 private:
  std::array<double, 3> reference() const {
    const double w = kOmega * kDt * static_cast<double>(t_);
    return {center_[0] + 0.5 * std::cos(w + phase_[0]), center_[1] + 0.5 * std::sin(w + phase_[1]),
            center_[2] + 0.25 * std::sin(2.0 * w + phase_[2])};
  }

  State observe() const {
    const auto ref = reference();
    State s(12);
    for (int i = 0; i < 3; ++i) {
      s(i) = pos_[i];
      s(3 + i) = vel_[i];
      s(6 + i) = ref[i];
      s(9 + i) = ref[i] - pos_[i];
    }
    return s;
  }

  std::int64_t horizon_;
  std::array<double, 3> pos_{}, vel_{}, center_{}, phase_{};
  std::int64_t t_ = 0;
};

inline std::vector<std::string> builtin_env_names() { return {"point_mass_reach", "linear_tracker"}; }

inline std::unique_ptr<VectorEnv> make_builtin_env(const std::string& name, std::int64_t horizon = 150) {
  if (name == "point_mass_reach") return std::make_unique<PointMassReach>(horizon);
  if (name == "linear_tracker") return std::make_unique<LinearTracker>(horizon);
  throw ConfigError("unknown environment '" + name + "'");
}

// Reference dimensions of the MuJoCo tasks (data only; no simulator).
struct ReferenceTaskDims {
  std::string name;
  std::size_t state_dim;
  std::size_t action_dim;
};

inline std::vector<ReferenceTaskDims> reference_task_dims() {
  return {{"Humanoid-v3", 376, 17}, {"HalfCheetah-v3", 17, 6}, {"Walker2d-v3", 17, 6}, {"Hopper-v3", 11, 3}};
}

}  // namespace anf::env
