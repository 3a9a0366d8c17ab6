#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "anf/nn/mlp.hpp"

namespace anf::nn {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kTanhEpsilon = 1e-6;

template <class S>
struct GaussianPolicyOutput {
  Vector<S> mean;
  Vector<S> log_std;
  Vector<S> sampled_action;  // in [-1, 1]
  S log_prob = S(0);
};

// Batched tanh-squashed Gaussian sample with the reparameterization noise
// kept so the actor loss can be differentiated.
template <class S>
struct SquashedGaussianBatch {
  Matrix<S> log_std;     // clamped, [action_dim x batch]
  Matrix<S> std;
  Matrix<S> noise;       // xi
  Matrix<S> action;      // tanh(mean + std * xi)
  Matrix<S> log_prob;    // [1 x batch]
  Matrix<S> raw_log_std; // pre-clamp, for the clamp gradient
};

template <class S>
SquashedGaussianBatch<S> squashed_gaussian(const Matrix<S>& mean, const Matrix<S>& raw_log_std, const Matrix<S>& noise) {
  SquashedGaussianBatch<S> out;
  out.raw_log_std = raw_log_std;
  out.log_std = raw_log_std.cwiseMax(S(kLogStdMin)).cwiseMin(S(kLogStdMax));
  out.std = out.log_std.array().exp().matrix();
  out.noise = noise;
  const Matrix<S> u = mean + out.std.cwiseProduct(noise);
  out.action = u.array().tanh().matrix();
  const S half_log_2pi = static_cast<S>(0.5 * std::log(2.0 * std::numbers::pi));
  const auto per_dim = (S(-0.5) * noise.array().square() - out.log_std.array() - half_log_2pi) -
                       (S(1) - out.action.array().square() + S(kTanhEpsilon)).log();
  out.log_prob = per_dim.matrix().colwise().sum();
  return out;
}

// Given dL/daction and dL/dlog_prob (per batch column), returns
// (dL/dmean, dL/draw_log_std) through the reparameterized sample.
template <class S>
std::pair<Matrix<S>, Matrix<S>> squashed_gaussian_backward(const SquashedGaussianBatch<S>& b, const Matrix<S>& d_action,
                                                           const Matrix<S>& d_log_prob) {
  const auto a = b.action.array();
  const auto one_minus_a2 = S(1) - a.square();
  // d log_prob / du for the tanh correction term
  const Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic> dlogp_du = S(2) * a * one_minus_a2 / (one_minus_a2 + S(kTanhEpsilon));
  const Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic> dlp = d_log_prob.replicate(b.action.rows(), 1).array();
  const Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic> du = d_action.array() * one_minus_a2 + dlp * dlogp_du;
  Matrix<S> d_mean = du.matrix();
  const auto std_xi = b.std.array() * b.noise.array();
  Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic> d_ls = du * std_xi - dlp;
  const auto inside = (b.raw_log_std.array() >= S(kLogStdMin)) && (b.raw_log_std.array() <= S(kLogStdMax));
  Matrix<S> d_raw = inside.select(d_ls, S(0)).matrix();
  return {std::move(d_mean), std::move(d_raw)};
}

template <class S>
GaussianPolicyOutput<S> gaussian_head(const Vector<S>& mean, const Vector<S>& log_std, const Vector<S>& noise) {
  Matrix<S> m = mean, l = log_std, n = noise;
  auto b = squashed_gaussian<S>(m, l, n);
  GaussianPolicyOutput<S> out;
  out.mean = mean;
  out.log_std = b.log_std.col(0);
  out.sampled_action = b.action.col(0);
  out.log_prob = b.log_prob(0, 0);
  return out;
}

template <class S>
GaussianPolicyOutput<S> gaussian_head(const Vector<S>& mean, const Vector<S>& log_std, Rng& rng) {
  Vector<S> noise(mean.size());
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = static_cast<S>(rng.normal());
  return gaussian_head<S>(mean, log_std, noise);
}

// Density of a squashed action under (mean, log_std), with the same
// epsilon-regularized correction used during sampling.
inline double squashed_gaussian_log_density(double action, double mean, double log_std) {
  const double ls = std::clamp(log_std, kLogStdMin, kLogStdMax);
  const double sd = std::exp(ls);
  const double u = std::atanh(action);
  const double z = (u - mean) / sd;
  return -0.5 * z * z - ls - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(1.0 - action * action + kTanhEpsilon);
}

}  // namespace anf::nn
