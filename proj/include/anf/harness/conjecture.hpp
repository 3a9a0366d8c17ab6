#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "anf/error.hpp"
#include "anf/rng.hpp"

namespace anf::harness {

struct ConjecturePoint {
  std::int64_t step = 0;
  double w1 = 0.0;
  double w2 = 0.0;
};

struct ConjectureResult {
  std::vector<ConjecturePoint> trajectory;
  double final_w1 = 0.0;
  double final_w2 = 0.0;
  bool diverged = false;
};

// Plain per-sample gradient descent on L = 1/2 (w1 x1 + w2 x2 - a x1)^2 with
// x1 ~ N(0, 1) and the irrelevant x2 ~ N(noise_mean, 1). Weights start at
// the given point (default: small values). A trajectory point is kept every
// `record_every` steps.
inline ConjectureResult conjecture_oracle(double a, double noise_mean, double lr, std::int64_t steps, std::uint64_t seed = 0,
                                          double w1_init = 0.1, double w2_init = 0.1, std::int64_t record_every = 100) {
  if (!(lr > 0.0)) throw ConfigError("conjecture: learning rate must be positive");
  Rng rng(seed);
  ConjectureResult r;
  double w1 = w1_init, w2 = w2_init;
  r.trajectory.push_back({0, w1, w2});
  for (std::int64_t t = 1; t <= steps; ++t) {
    const double x1 = rng.normal(), x2 = rng.normal(noise_mean, 1.0);
    const double err = w1 * x1 + w2 * x2 - a * x1;
    w1 -= lr * err * x1;
    w2 -= lr * err * x2;
    if (!std::isfinite(w1) || !std::isfinite(w2) || std::abs(w1) > 1e6 || std::abs(w2) > 1e6) {
      r.diverged = true;
      r.trajectory.push_back({t, w1, w2});
      break;
    }
    if (t % record_every == 0 || t == steps) r.trajectory.push_back({t, w1, w2});
  }
  r.final_w1 = w1;
  r.final_w2 = w2;
  return r;
}

}  // namespace anf::harness
