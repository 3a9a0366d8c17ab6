#include <sstream>

#include <gtest/gtest.h>

#include "anf/agents/factory.hpp"
#include "anf/analytics/connectivity.hpp"
#include "anf/analytics/export.hpp"

using namespace anf;
using namespace anf::analytics;

namespace {

std::size_t occurrences(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

agents::AgentConfig agent_config(agents::Variant v) {
  agents::AgentConfig c;
  c.variant = v;
  c.hyper.hidden = {32, 32};
  c.state_dim = 40;
  c.action_dim = 3;
  return c;
}

}  // namespace

TEST(SplitMeans, RelevantAndNoiseAverages) {
  const std::vector<std::int64_t> counts{4, 6, 1, 1, 2, 9, 9};  // last two are action columns
  const auto m = split_means(counts, 5, {0, 1});
  EXPECT_DOUBLE_EQ(m.relevant, 5.0);
  ASSERT_TRUE(m.noise.has_value());
  EXPECT_DOUBLE_EQ(*m.noise, 4.0 / 3.0);
}

TEST(SplitMeans, NoNoiseFeatures) {
  const auto m = split_means({3, 5}, 2, {0, 1});
  EXPECT_DOUBLE_EQ(m.relevant, 4.0);
  EXPECT_FALSE(m.noise.has_value());
}

TEST(Connectivity, DenseAgentRecordsNothing) {
  auto agent = agents::make_agent<float>(agent_config(agents::Variant::dense), 0);
  std::vector<ConnectivityTimeline> tl;
  EXPECT_FALSE(record_connectivity(*agent, 0, {0, 1}, tl));
  EXPECT_TRUE(tl.empty());
}

TEST(Connectivity, TimelinesPerNetworkMatchMasks) {
  auto agent = agents::make_agent<float>(agent_config(agents::Variant::anf), 1);
  std::vector<ConnectivityTimeline> tl;
  const std::vector<std::size_t> rel{0, 1, 2, 3};
  ASSERT_TRUE(record_connectivity(*agent, 0, rel, tl));
  ASSERT_TRUE(record_connectivity(*agent, 100, rel, tl));
  ASSERT_EQ(tl.size(), 3u);
  EXPECT_EQ(tl[0].network, "actor");
  EXPECT_EQ(tl[1].network, "critic1");
  EXPECT_EQ(tl[0].steps, (std::vector<std::int64_t>{0, 100}));
  // oracle from the mask bits, state columns only
  for (const auto& t : tl) {
    const auto& mask = *agent->slot(t.network).online.layer(0).mask;
    double rs = 0, ns = 0;
    for (std::size_t c = 0; c < 40; ++c)
      for (std::size_t r = 0; r < mask.rows(); ++r) (c < 4 ? rs : ns) += mask.test(r, c);
    EXPECT_DOUBLE_EQ(t.relevant_mean[0], rs / 4.0) << t.network;
    EXPECT_DOUBLE_EQ(*t.noise_mean[0], ns / 36.0) << t.network;
  }
}

TEST(Snapshot, CountsSumToMaskSize) {
  auto agent = agents::make_agent<float>(agent_config(agents::Variant::anf), 2);
  for (const char* net : {"actor", "critic1", "critic2"}) {
    const auto snap = snapshot_neurons(*agent, 7, {0, 5}, net);
    EXPECT_EQ(static_cast<std::size_t>(snap.total()), agent->slot(net).online.layer(0).mask->count());
    EXPECT_TRUE(snap.relevant[0]);
    EXPECT_TRUE(snap.relevant[5]);
    EXPECT_FALSE(snap.relevant[1]);
  }
}

TEST(Snapshot, TopKOrdering) {
  NeuronSnapshot s{0, "actor", {3, 9, 9, 1, 5}, {false, false, false, false, false}};
  EXPECT_EQ(top_k_neurons(s, 3), (std::vector<std::size_t>{1, 2, 4}));
  EXPECT_EQ(top_k_neurons(s, 10).size(), 5u);
  EXPECT_TRUE(top_k_neurons(s, 0).empty());
}

TEST(Export, TimelineCsvRoundTrip) {
  std::vector<ConnectivityTimeline> tl{{"actor", {0, 10}, {1.5, 2.25}, {0.75, 0.1 + 0.2}},
                                       {"critic1", {0}, {3.0}, {std::nullopt}}};
  std::stringstream ss;
  write_timeline_csv(tl, ss);
  EXPECT_EQ(read_timeline_csv(ss), tl);
}

TEST(Export, EmptyTimelineIsHeaderOnly) {
  std::stringstream ss;
  write_timeline_csv({}, ss);
  EXPECT_EQ(ss.str(), std::string(kTimelineHeader) + "\n");
  EXPECT_TRUE(read_timeline_csv(ss).empty());
  std::stringstream bad("nope\n");
  EXPECT_THROW(read_timeline_csv(bad), IoError);
  std::stringstream short_row(std::string(kTimelineHeader) + "\n1,2\n");
  EXPECT_THROW(read_timeline_csv(short_row), IoError);
}

TEST(Export, SnapshotCsvRoundTrip) {
  std::vector<NeuronSnapshot> snaps{{0, "actor", {1, 2, 3}, {true, false, false}}, {50, "actor", {0, 4, 2}, {false, true, false}}};
  std::stringstream ss;
  write_snapshot_csv(snaps, ss);
  const auto back = read_snapshot_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].step, snaps[i].step);
    EXPECT_EQ(back[i].counts, snaps[i].counts);
    EXPECT_EQ(back[i].relevant, snaps[i].relevant);
  }
}

TEST(Export, LineChartHasOnePolylinePerSeries) {
  std::vector<Series> s{{"a", {0, 1, 2}, {1, 2, 3}, {}}, {"b", {0, 1, 2}, {3, 2, 1}, {0.1, 0.2, 0.3}}, {"c", {5}, {5}, {}}};
  const auto svg = line_chart_svg("t", "x", "y", s);
  EXPECT_EQ(occurrences(svg, "<polyline"), 3u);
  EXPECT_EQ(occurrences(svg, "<polygon"), 1u);
  EXPECT_EQ(svg.rfind("</svg>"), svg.size() - 7);
  EXPECT_EQ(occurrences(line_chart_svg("t", "x", "y", {}), "<polyline"), 0u);
}

TEST(Export, TimelineSeriesSkipsAbsentNoise) {
  ConnectivityTimeline t{"actor", {0, 1}, {2.0, 3.0}, {std::nullopt, std::nullopt}};
  EXPECT_EQ(timeline_series(t).size(), 1u);
  t.noise_mean = {1.0, 1.0};
  EXPECT_EQ(timeline_series(t).size(), 2u);
}

TEST(Export, NeuronBars) {
  NeuronSnapshot s{0, "actor", {1, 0, 3}, {true, false, false}};
  const auto svg = neuron_bar_svg(s, "bars");
  EXPECT_EQ(occurrences(svg, "<rect x="), 3u);
  EXPECT_EQ(occurrences(svg, "#d62728"), 1u);
}
