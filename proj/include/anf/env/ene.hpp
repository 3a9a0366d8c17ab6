#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <cereal/archives/binary.hpp>

#include "anf/env/histogram.hpp"
#include "anf/env/vector_env.hpp"
#include "anf/error.hpp"

namespace anf::env {

// State dimension after padding d_og relevant features with noise so that
// noise makes up a fraction n_f: ceil(d_og / (1 - n_f)).
inline std::size_t ene_dim(std::size_t d_og, double noise_fraction) {
  if (!(noise_fraction >= 0.0 && noise_fraction < 1.0)) throw ConfigError("noise_fraction must be in [0, 1)");
  const double raw = static_cast<double>(d_og) / (1.0 - noise_fraction);
  // guard against values like 84.99999999999999 from inexact fractions
  const double snapped = std::round(raw);
  if (std::abs(raw - snapped) < 1e-9 * std::max(1.0, raw)) return static_cast<std::size_t>(snapped);
  return static_cast<std::size_t>(std::ceil(raw));
}

enum class NoiseDistribution { gaussian, imitate };

struct EneConfig {
  double noise_fraction = 0.9;
  double noise_mean = 0.0;
  double noise_amplitude = 1.0;  // standard deviation
  NoiseDistribution distribution = NoiseDistribution::gaussian;
  std::vector<HistogramDistribution> imitate_histograms;

  void validate() const {
    if (!(noise_fraction >= 0.0 && noise_fraction < 1.0)) throw ConfigError("ene.noise_fraction must be in [0, 1)");
    if (!(noise_amplitude > 0.0)) throw ConfigError("ene.noise_amplitude must be positive");
    if (distribution == NoiseDistribution::imitate) {
      if (imitate_histograms.empty()) throw ConfigError("ene: imitate mode needs histograms");
      for (const auto& h : imitate_histograms) h.validate();
    }
  }
};

// Extremely noisy environment: the inner state followed by freshly sampled
// i.i.d. noise features. Reward and done pass through untouched.
class EneEnv final : public VectorEnv {
 public:
  EneEnv(std::unique_ptr<VectorEnv> inner, EneConfig config, Rng noise_rng)
      : inner_(std::move(inner)), config_(std::move(config)), rng_(std::move(noise_rng)) {
    config_.validate();
    d_ene_ = ene_dim(inner_->state_dim(), config_.noise_fraction);
  }

  EneEnv(const EneEnv& o) : inner_(o.inner_->clone()), config_(o.config_), rng_(o.rng_), d_ene_(o.d_ene_) {}

  std::string name() const override { return inner_->name(); }
  std::size_t state_dim() const override { return d_ene_; }
  std::size_t original_dim() const { return inner_->state_dim(); }
  std::size_t action_dim() const override { return inner_->action_dim(); }
  Eigen::VectorXd action_low() const override { return inner_->action_low(); }
  Eigen::VectorXd action_high() const override { return inner_->action_high(); }
  std::int64_t horizon() const override { return inner_->horizon(); }
  const EneConfig& config() const { return config_; }
  const VectorEnv& inner() const { return *inner_; }

  State reset(Rng& rng) override { return augment(inner_->reset(rng)); }

  StepResult step(const Action& action) override {
    auto r = inner_->step(action);
    r.state = augment(r.state);
    return r;
  }

  std::optional<Action> scripted_action(const State& s) const override {
    return inner_->scripted_action(s.head(static_cast<Eigen::Index>(original_dim())));
  }

  std::unique_ptr<VectorEnv> clone() const override { return std::make_unique<EneEnv>(*this); }

  void save_state(std::ostream& os) const override {
    {
      cereal::BinaryOutputArchive ar(os);
      ar(rng_);
    }
    inner_->save_state(os);
  }
  void load_state(std::istream& is) override {
    {
      cereal::BinaryInputArchive ar(is);
      ar(rng_);
    }
    inner_->load_state(is);
  }

  State augment(const State& original) {
    const auto d_og = static_cast<Eigen::Index>(original.size());
    State s(static_cast<Eigen::Index>(d_ene_));
    s.head(d_og) = original;
    const std::size_t count = d_ene_ - static_cast<std::size_t>(d_og);
    if (config_.distribution == NoiseDistribution::gaussian) {
      for (Eigen::Index j = d_og; j < s.size(); ++j) s(j) = rng_.normal(config_.noise_mean, config_.noise_amplitude);
    } else {
      s.tail(static_cast<Eigen::Index>(count)) = sample_imitated(config_.imitate_histograms, count, rng_);
    }
    return s;
  }

 private:
  std::unique_ptr<VectorEnv> inner_;
  EneConfig config_;
  Rng rng_;
  std::size_t d_ene_ = 0;
};

// Permuted ENE schedule. Period p = floor(step / period) uses permutation
// pi_p (pi_0 = identity); permuted[j] = state[pi_p[j]].
class PermutationSchedule {
 public:
  PermutationSchedule() = default;
  PermutationSchedule(std::size_t dim, std::int64_t period, std::uint64_t seed) : dim_(dim), period_(period), seed_(seed) {
    if (period <= 0) throw ConfigError("pene.period must be positive");
  }

  std::size_t dim() const { return dim_; }
  std::int64_t period() const { return period_; }
  std::int64_t period_index(std::int64_t env_step) const { return env_step / period_; }

  std::vector<std::size_t> permutation(std::int64_t period_index) const {
    std::vector<std::size_t> p(dim_);
    std::iota(p.begin(), p.end(), std::size_t{0});
    if (period_index == 0) return p;
    Rng rng = Rng::derive(seed_, static_cast<std::uint64_t>(period_index));
    for (std::size_t i = dim_; i-- > 1;) {
      const auto j = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i)));
      std::swap(p[i], p[j]);
    }
    return p;
  }

  const std::vector<std::size_t>& cached(std::int64_t period_index) const {
    if (cache_index_ != period_index || cache_.size() != dim_) {
      cache_ = permutation(period_index);
      cache_index_ = period_index;
    }
    return cache_;
  }

  State apply(std::int64_t env_step, const State& state) const {
    if (static_cast<std::size_t>(state.size()) != dim_) throw ConfigError("pene_apply: state length mismatch");
    const auto& p = cached(period_index(env_step));
    State out(state.size());
    for (std::size_t j = 0; j < dim_; ++j) out(static_cast<Eigen::Index>(j)) = state(static_cast<Eigen::Index>(p[j]));
    return out;
  }

  // Positions holding original features [0, d_og) during the given step.
  std::vector<std::size_t> relevant_positions(std::int64_t env_step, std::size_t d_og) const {
    const auto& p = cached(period_index(env_step));
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < dim_; ++j)
      if (p[j] < d_og) out.push_back(j);
    return out;
  }

 private:
  std::size_t dim_ = 0;
  std::int64_t period_ = 1;
  std::uint64_t seed_ = 0;
  mutable std::vector<std::size_t> cache_;
  mutable std::int64_t cache_index_ = -1;
};

inline State invert_permutation_apply(const std::vector<std::size_t>& perm, const State& permuted) {
  State out(permuted.size());
  for (std::size_t j = 0; j < perm.size(); ++j) out(static_cast<Eigen::Index>(perm[j])) = permuted(static_cast<Eigen::Index>(j));
  return out;
}

}  // namespace anf::env
