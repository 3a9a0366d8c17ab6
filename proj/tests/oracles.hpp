#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <vector>

#include "anf/dst/set.hpp"
#include "anf/nn/adam.hpp"
#include "anf/nn/gaussian.hpp"
#include "anf/nn/mlp.hpp"

namespace anf::oracle {

using nn::Matrix;

inline nn::MlpSpec spec(std::size_t in, std::vector<std::size_t> hidden, std::size_t out) {
  nn::MlpSpec s;
  s.input_dim = in;
  s.hidden_dims = std::move(hidden);
  s.output_dim = out;
  return s;
}

inline double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

// Bottom-n existing positions by (|w|, flat index), via a full sort.
inline std::vector<std::size_t> brute_force_drop(const dst::TopologyMask& mask, const Matrix<double>& w, std::size_t n) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t f = 0; f < mask.size(); ++f)
    if (mask.test_flat(f))
      all.push_back({std::abs(w(static_cast<Eigen::Index>(f / mask.cols()), static_cast<Eigen::Index>(f % mask.cols()))), f});
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(all[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

struct SetCheck {
  std::size_t calls = 0;
  std::size_t drop_mismatches = 0;
  std::size_t density_drift = 0;      // count changes beyond the reported shortfall
  std::size_t regrown_occupied = 0;   // grown where a connection already existed
  std::size_t nonzero_grown = 0;      // grown weight != 0
  std::size_t nonzero_moments = 0;    // Adam m or v != 0 at a dropped or grown position
  bool ok() const { return drop_mismatches + density_drift + regrown_occupied + nonzero_grown + nonzero_moments == 0; }
};

// Randomized evolve calls on random layers compared against brute force.
// Every fifth call uses coarsely rounded weights to force ties.
inline SetCheck check_set_evolve(std::size_t calls, std::uint64_t seed) {
  Rng rng(seed);
  SetCheck r;
  for (std::size_t trial = 0; trial < calls; ++trial) {
    const auto rows = static_cast<std::size_t>(rng.integer(2, 40));
    const auto cols = static_cast<std::size_t>(rng.integer(2, 40));
    const double s = rng.uniform(0.1, 0.9);
    const double df = rng.uniform(0.01, 0.5);
    auto mask = dst::init_mask(rows, cols, s, rng);
    Matrix<double> w(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = trial % 5 == 0 ? std::round(rng.normal() * 3) / 3 : rng.normal();
    nn::LayerParams<double> L{w, nn::Vector<double>::Zero(static_cast<Eigen::Index>(rows)), mask};
    L.apply_mask();
    const auto want = brute_force_drop(*L.mask, L.weights, dst::drop_count(df, L.mask->count()));
    const auto before = *L.mask;
    const auto count = L.mask->count();

    nn::AdamState<double> st;
    st.m_weights = {Matrix<double>::Constant(w.rows(), w.cols(), 0.3)};
    st.v_weights = {Matrix<double>::Constant(w.rows(), w.cols(), 0.4)};
    auto d = dst::evolve(*L.mask, L.weights, df, rng);
    dst::apply_delta_to_optimizer(d, st, 0);
    ++r.calls;

    auto got = d.dropped;
    std::sort(got.begin(), got.end());
    if (got != want) ++r.drop_mismatches;
    const auto vacant = before.size() - count;
    const auto shortfall = want.size() > vacant ? want.size() - vacant : 0;
    if (d.growth_shortfall != shortfall || L.mask->count() != count - shortfall) ++r.density_drift;
    auto at = [&](std::size_t f) { return std::pair{static_cast<Eigen::Index>(f / cols), static_cast<Eigen::Index>(f % cols)}; };
    for (auto f : d.grown) {
      if (before.test_flat(f)) ++r.regrown_occupied;
      const auto [i, j] = at(f);
      if (L.weights(i, j) != 0.0) ++r.nonzero_grown;
      if (st.m_weights[0](i, j) != 0.0 || st.v_weights[0](i, j) != 0.0) ++r.nonzero_moments;
    }
    for (auto f : d.dropped) {
      const auto [i, j] = at(f);
      if (st.m_weights[0](i, j) != 0.0 || st.v_weights[0](i, j) != 0.0) ++r.nonzero_moments;
    }
  }
  return r;
}

struct GradCheck {
  double worst = 0.0;               // max relative error over weights, biases and inputs
  std::size_t masked_nonzero = 0;   // gradient entries at masked positions that are not 0
};

// Central finite differences of L = sum(c .* f(x)) on random ReLU nets
// (dims <= 32, 1-3 hidden layers, masked input layer on even trials).
inline GradCheck check_gradients(int nets, std::uint64_t seed) {
  Rng rng(seed);
  GradCheck r;
  for (int trial = 0; trial < nets; ++trial) {
    const auto in = static_cast<std::size_t>(rng.integer(1, 32));
    const auto depth = rng.integer(1, 3);
    std::vector<std::size_t> hidden;
    for (int d = 0; d < depth; ++d) hidden.push_back(static_cast<std::size_t>(rng.integer(2, 32)));
    const auto out = static_cast<std::size_t>(rng.integer(1, 8));
    nn::Mlp<double> net(spec(in, hidden, out), rng);
    if (trial % 2 == 0) net.set_mask(0, dst::init_mask(hidden[0], in, 0.5, rng));
    Matrix<double> x(static_cast<Eigen::Index>(in), 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    Matrix<double> c(static_cast<Eigen::Index>(out), 3);
    for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = rng.normal();
    auto loss = [&](const nn::Mlp<double>& n) { return n.forward(x).cwiseProduct(c).sum(); };

    nn::ForwardCache<double> cache;
    net.forward(x, &cache);
    Matrix<double> dx;
    const auto g = net.backward(cache, c, &dx);
    const double h = 1e-5;
    for (std::size_t k = 0; k < net.num_layers(); ++k) {
      for (Eigen::Index i = 0; i < net.layer(k).weights.size(); ++i) {
        const auto& L = net.layer(k);
        const auto row = i % L.weights.rows(), col = i / L.weights.rows();
        if (L.mask && !L.mask->test(static_cast<std::size_t>(row), static_cast<std::size_t>(col))) {
          if (g.layers[k].weights(row, col) != 0.0) ++r.masked_nonzero;
          continue;
        }
        auto plus = net, minus = net;
        plus.mutable_layer(k).weights(row, col) += h;
        minus.mutable_layer(k).weights(row, col) -= h;
        r.worst = std::max(r.worst, relative_error(g.layers[k].weights(row, col), (loss(plus) - loss(minus)) / (2 * h)));
      }
      for (Eigen::Index i = 0; i < net.layer(k).biases.size(); ++i) {
        auto plus = net, minus = net;
        plus.mutable_layer(k).biases(i) += h;
        minus.mutable_layer(k).biases(i) -= h;
        r.worst = std::max(r.worst, relative_error(g.layers[k].biases(i), (loss(plus) - loss(minus)) / (2 * h)));
      }
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Matrix<double> xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      const double fd = (net.forward(xp).cwiseProduct(c).sum() - net.forward(xm).cwiseProduct(c).sum()) / (2 * h);
      r.worst = std::max(r.worst, relative_error(dx(i), fd));
    }
  }
  return r;
}

// Probability mass of the squashed Gaussian over (-1, 1), by the midpoint
// rule in u = atanh(a) where the integrand is smooth.
inline double squashed_gaussian_mass(double mean, double log_std) {
  const int n = 200000;
  const double lo = -12.0, hi = 12.0, du = (hi - lo) / n;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = lo + (i + 0.5) * du;
    const double a = std::tanh(u);
    total += std::exp(nn::squashed_gaussian_log_density(a, mean, log_std)) * (1.0 - a * a) * du;
  }
  return total;
}

}  // namespace anf::oracle
