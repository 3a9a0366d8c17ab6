#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "anf/dst/set.hpp"
#include "anf/dst/sparsity.hpp"
#include "oracles.hpp"

using namespace anf;
using nn::Matrix;

using oracle::spec;

TEST(InitMask, ZeroSparsityIsFull) {
  Rng rng(0);
  auto m = dst::init_mask(7, 5, 0.0, rng);
  EXPECT_EQ(m.count(), 35u);
}

TEST(InitMask, ExactCountAndPerInputMean) {
  Rng rng(1);
  auto m = dst::init_mask(256, 170, 0.8, rng);
  EXPECT_EQ(m.count(), dst::kept_connections(256, 170, 0.8));
  const auto counts = dst::connections_per_input(m);
  const double mean = std::accumulate(counts.begin(), counts.end(), 0.0) / static_cast<double>(counts.size());
  EXPECT_NEAR(mean, 51.2, 0.05);
}

TEST(InitMask, FreshMaskOn85InputsAverages51) {
  Rng rng(2);
  auto m = dst::init_mask(256, 85, 0.8, rng);
  const auto counts = dst::connections_per_input(m);
  EXPECT_NEAR(std::accumulate(counts.begin(), counts.end(), 0.0) / 85.0, 51.2, 0.05);
}

TEST(InitMask, ColumnCountsAreUniform) {
  // Pooled column totals over 1e4 re-inits of a 10x8 mask at 70% sparsity.
  Rng rng(3);
  const std::size_t rows = 10, cols = 8, reps = 10000;
  std::vector<double> totals(cols, 0.0);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto c = dst::connections_per_input(dst::init_mask(rows, cols, 0.7, rng));
    for (std::size_t j = 0; j < cols; ++j) totals[j] += static_cast<double>(c[j]);
  }
  const double expected = std::accumulate(totals.begin(), totals.end(), 0.0) / cols;
  double chi2 = 0.0;
  for (double t : totals) chi2 += (t - expected) * (t - expected) / expected;
  // chi-square 7 dof, upper 1% point 18.475
  EXPECT_LT(chi2, 18.475);
}

TEST(Evolve, NothingToDropLeavesMaskUnchanged) {
  Rng rng(4);
  auto m = dst::init_mask(4, 4, 0.5, rng);
  Matrix<double> w = Matrix<double>::Random(4, 4);
  const auto before = m;
  auto d = dst::evolve(m, w, 0.05, rng);  // floor(0.05 * 8) = 0
  EXPECT_TRUE(d.empty());
  EXPECT_EQ(m, before);
}

TEST(Evolve, DropsSingleSmallestOfTwenty) {
  Rng rng(5);
  auto m = dst::TopologyMask::empty(5, 8, 0.5);
  Matrix<double> w = Matrix<double>::Zero(5, 8);
  std::vector<std::size_t> pos;
  for (std::size_t f = 0; f < 40; f += 2) pos.push_back(f);
  double mag = 1.0;
  for (auto f : pos) {
    m.set_flat(f, true);
    w(static_cast<Eigen::Index>(f / 8), static_cast<Eigen::Index>(f % 8)) = (f % 4 ? -1.0 : 1.0) * (mag += 0.5);
  }
  w(2, 2) = 0.01;  // flat 18
  auto d = dst::evolve(m, w, 0.05, rng);
  ASSERT_EQ(d.dropped.size(), 1u);
  EXPECT_EQ(d.dropped[0], 18u);
  EXPECT_EQ(d.grown.size(), 1u);
  EXPECT_EQ(m.count(), 20u);
}

TEST(Evolve, TiesBreakByLowestFlatIndex) {
  Rng rng(6);
  auto m = dst::TopologyMask(2, 10);  // 20 existing
  Matrix<double> w = Matrix<double>::Ones(2, 10);
  w(1, 3) = 0.5;
  w(0, 7) = 0.5;
  auto d = dst::evolve(m, w, 0.05, rng);
  ASSERT_EQ(d.dropped.size(), 1u);
  EXPECT_EQ(d.dropped[0], 7u);
}

TEST(Evolve, MatchesBruteForceOracleOverManyCalls) {
  const auto r = oracle::check_set_evolve(1000, 7);
  EXPECT_EQ(r.calls, 1000u);
  EXPECT_EQ(r.drop_mismatches, 0u);
  EXPECT_EQ(r.density_drift, 0u);
  EXPECT_EQ(r.regrown_occupied, 0u);
  EXPECT_EQ(r.nonzero_grown, 0u);
  EXPECT_EQ(r.nonzero_moments, 0u);
}

TEST(Evolve, ProtectedPositionsAreNeverDropped) {
  Rng rng(8);
  auto m = dst::TopologyMask(4, 10);
  Matrix<double> w = Matrix<double>::Ones(4, 10);
  w(0, 0) = w(0, 1) = 0.0;
  const std::vector<std::size_t> protect{0, 1};
  auto d = dst::evolve(m, w, 0.05, rng, protect);
  ASSERT_EQ(d.dropped.size(), 2u);
  for (auto f : d.dropped) EXPECT_GE(f, 2u);
}

TEST(Evolve, ApplyDeltaKeepsTargetInSync) {
  Rng rng(9);
  nn::Mlp<double> online(spec(10, {12}, 3), rng);
  online.set_mask(0, dst::init_mask(12, 10, 0.8, rng));
  auto target = online;
  for (int i = 0; i < 20; ++i) {
    auto& L = online.mutable_layer(0);
    for (Eigen::Index k = 0; k < L.weights.size(); ++k) L.weights(k) += rng.normal(0.0, 0.1);
    L.apply_mask();
    auto d = dst::evolve(*L.mask, L.weights, 0.2, rng);
    dst::apply_delta(target.mutable_layer(0), d);
    EXPECT_EQ(*target.layer(0).mask, *online.layer(0).mask);
  }
}

TEST(Sparsity, GlobalSparsityOfDenseNetIsZero) {
  Rng rng(10);
  nn::Mlp<double> net(spec(5, {4, 4}, 2), rng);
  EXPECT_EQ(dst::global_sparsity(net), 0.0);
}

TEST(Sparsity, GlobalSparsityMatchesBitCount) {
  Rng rng(11);
  nn::Mlp<double> net(spec(20, {16, 8}, 3), rng);
  net.set_mask(0, dst::init_mask(16, 20, 0.7, rng));
  net.set_mask(1, dst::init_mask(8, 16, 0.4, rng));
  std::size_t bits = 0, total = 0;
  for (const auto& L : net.layers()) {
    total += static_cast<std::size_t>(L.weights.size());
    if (L.mask)
      for (auto b : L.mask->bits()) bits += b;
    else
      bits += static_cast<std::size_t>(L.weights.size());
  }
  EXPECT_DOUBLE_EQ(dst::global_sparsity(net), 1.0 - static_cast<double>(bits) / static_cast<double>(total));
}

TEST(Sparsity, HumanoidShapedAnfActor) {
  Rng rng(12);
  nn::Mlp<float> actor(spec(3760, {256, 256}, 17), rng);
  actor.set_mask(0, dst::init_mask(256, 3760, 0.8, rng));
  EXPECT_EQ(actor.existing_weights(), 262400u);
  EXPECT_NEAR(dst::global_sparsity(actor), 0.746, 0.001);
}

TEST(Sparsity, SparserNinetyFiveHumanoidCount) {
  const auto shapes = dst::layer_shapes(spec(3760, {256, 256}, 17));
  const auto s = dst::uniform_allocation(0.95, shapes, true);
  EXPECT_EQ(s.back(), 0.0);
  const auto n = static_cast<double>(dst::allocated_weights(shapes, s));
  EXPECT_NEAR(n, 51622.0, 1.0);
}

TEST(Sparsity, ZeroTargetIsDense) {
  const auto s = dst::uniform_allocation(0.0, dst::layer_shapes(spec(30, {20}, 4)), true);
  for (double v : s) EXPECT_EQ(v, 0.0);
}

TEST(Sparsity, RandomShapesHitTarget) {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    std::vector<dst::LayerShape> shapes;
    std::size_t total = 0;
    const auto layers = rng.integer(2, 4);
    for (int k = 0; k < layers; ++k) {
      shapes.push_back({static_cast<std::size_t>(rng.integer(8, 300)), static_cast<std::size_t>(rng.integer(8, 300))});
      total += shapes.back().size();
    }
    shapes.back().out = static_cast<std::size_t>(rng.integer(1, 4));
    total = 0;
    for (const auto& s : shapes) total += s.size();
    const double target = rng.uniform(0.0, 0.8);
    std::vector<double> s;
    try {
      s = dst::uniform_allocation(target, shapes, true);
    } catch (const ConfigError&) {
      continue;
    }
    const double got = 1.0 - static_cast<double>(dst::allocated_weights(shapes, s)) / static_cast<double>(total);
    // one rounding per sparse layer
    EXPECT_LE(std::abs(got - target), static_cast<double>(layers) / static_cast<double>(total));
  }
}

TEST(Sparsity, InfeasibleTargetIsRejected) {
  EXPECT_THROW(dst::uniform_allocation(0.99, {{4, 4}, {100, 4}}, true), ConfigError);
}

TEST(Connectivity, DenseLayerCountsEqualOutDim) {
  Rng rng(14);
  nn::Mlp<double> net(spec(6, {9}, 1), rng);
  for (auto c : dst::connections_per_input(net.layer(0))) EXPECT_EQ(c, 9);
}

TEST(Connectivity, MatchesBruteForce) {
  Rng rng(15);
  auto m = dst::init_mask(13, 7, 0.6, rng);
  const auto c = dst::connections_per_input(m);
  for (std::size_t j = 0; j < 7; ++j) {
    std::int64_t n = 0;
    for (std::size_t r = 0; r < 13; ++r) n += m.test(r, j);
    EXPECT_EQ(c[j], n);
  }
}

TEST(MaskCsv, RoundTrip) {
  Rng rng(16);
  auto m = dst::init_mask(9, 11, 0.5, rng);
  std::stringstream ss;
  dst::write_mask_csv(m, ss);
  const auto back = dst::read_mask_csv(ss);
  EXPECT_EQ(back.bits(), m.bits());
  std::stringstream bad("rows,cols\n2,2\nrow,col\n5,0\n");
  EXPECT_THROW(dst::read_mask_csv(bad), IoError);
}

TEST(Mask, OutOfRangeSetIsRejected) {
  dst::TopologyMask m(2, 2);
  EXPECT_THROW(m.set_flat(4, false), UsageError);
}
