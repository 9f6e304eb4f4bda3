// Copyright 2026 The BusTr Authors. All rights reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bustr/featurizer.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "bustr/error.h"

namespace bustr {
namespace {

constexpr int64_t kMonday = 1704067200;  // 2024-01-01 00:00 UTC

Quantum Segment(int index, double metres, LatLng at) {
  Quantum q;
  q.kind = QuantumKind::kSegment;
  q.cells = ModelCells(at);
  q.traversed_m = metres;
  q.segment_index = index;
  return q;
}

Quantum Stop(const std::string& id, LatLng at) {
  Quantum q;
  q.kind = QuantumKind::kStop;
  q.cells = ModelCells(at);
  q.stop_id = id;
  return q;
}

QuantizedShingle Item(const std::string& route, int64_t start_ts, int64_t duration,
                      std::vector<Quantum> quanta) {
  QuantizedShingle item;
  item.shingle.route = {"f", route, {"a", "b"}};
  item.shingle.shape_id = "shape-" + route;
  item.shingle.start_ts = start_ts;
  item.shingle.end_ts = start_ts + duration;
  item.quanta = std::move(quanta);
  return item;
}

std::vector<QuantizedShingle> TwoRoutes() {
  return {Item("r1", kMonday, 100, {Segment(0, 500, {10.3, 20.40}), Stop("a", {10.3, 20.41}),
                                    Segment(1, 400, {10.3, 20.42})}),
          Item("r2", kMonday + 3600, 80, {Segment(0, 700, {10.4, 20.40})})};
}

TEST(VocabTest, BuildAndOov) {
  const Vocabs v = BuildVocabs(TwoRoutes());
  EXPECT_EQ(v.route.size(), 3u);
  EXPECT_TRUE(v.route.Contains(RouteKey{"f", "r1", {"a", "b"}}.Token()));
  EXPECT_EQ(v.route.IndexOf("f|unseen|a,b"), Vocab::kAbsent);
  EXPECT_GE(v.cells[0].size(), 4u);
  EXPECT_THROW(BuildVocabs({}), Error);
}

TEST(VocabTest, ShuffleInvariantAndRoundTrip) {
  std::vector<std::string> tokens;
  for (int k = 0; k < 50; ++k) tokens.push_back("t" + std::to_string(k % 37));
  const Vocab a = Vocab::Build("x", tokens);
  std::shuffle(tokens.begin(), tokens.end(), std::mt19937_64(1));
  const Vocab b = Vocab::Build("x", tokens);
  EXPECT_EQ(a.tokens(), b.tokens());
  EXPECT_EQ(a.Hash(), b.Hash());
  EXPECT_EQ(a.size(), 38u);
  for (int32_t i = 1; i < static_cast<int32_t>(a.size()); ++i) EXPECT_EQ(a.IndexOf(a.Token(i)), i);
  std::ostringstream out;
  a.Write(out);
  std::istringstream in(out.str());
  const Vocab c = Vocab::Read("x", in);
  EXPECT_EQ(c.tokens(), a.tokens());
  EXPECT_EQ(c.Hash(), a.Hash());
}

TEST(TrafficTimestampsTest, ConstantSpeed) {
  TrafficTable table(5, 10.0);
  const std::vector<Quantum> q{Segment(0, 1000, {0, 0}), Stop("s", {0, 0}), Segment(1, 500, {0, 0})};
  const auto steps = TrafficTimestamps(kMonday, "sh", q, table);
  ASSERT_EQ(steps.size(), 2u);
  EXPECT_EQ(steps[0].lookup_ts, static_cast<double>(kMonday));
  EXPECT_DOUBLE_EQ(steps[1].lookup_ts, kMonday + 100.0);
  const std::vector<Quantum> one{Segment(3, 250, {0, 0})};
  EXPECT_EQ(TrafficTimestamps(kMonday + 7, "sh", one, table)[0].lookup_ts, kMonday + 7.0);
}

TEST(TrafficTimestampsTest, SpeedChangeAfterFirstLeg) {
  TrafficTable table(1);
  const int64_t m0 = kMonday / 60;
  table.Add({"sh", 0}, m0, 10.0);
  table.Add({"sh", 0}, m0 + 1, 10.0);
  table.Add({"sh", 1}, m0, 4.0);
  table.Add({"sh", 1}, m0 + 1, 4.0);
  table.Add({"sh", 1}, m0 + 2, 20.0);  // from kMonday + 120
  table.Finalize();
  const std::vector<Quantum> q{Segment(0, 1200, {0, 0}), Segment(1, 600, {0, 0}),
                               Segment(2, 100, {0, 0})};
  const auto steps = TrafficTimestamps(kMonday, "sh", q, table);
  ASSERT_EQ(steps.size(), 3u);
  // Hand-stepped: 1200 m at 10 m/s ends at +120, where segment 1 runs at
  // 20 m/s, so segment 2 is looked up at +150.
  EXPECT_DOUBLE_EQ(steps[1].lookup_ts, kMonday + 120.0);
  EXPECT_EQ(steps[1].speed_mps, 20.0);
  EXPECT_EQ(steps[1].source, TrafficSource::kExact);
  EXPECT_DOUBLE_EQ(steps[2].lookup_ts, kMonday + 150.0);
  EXPECT_EQ(steps[2].source, TrafficSource::kGlobalMean);
}

TEST(FeaturizerTest, ContextAndQuanta) {
  const auto items = TwoRoutes();
  TrafficTable table(5, 10.0);
  table.Add({"shape-r1", 0}, kMonday / 60, 5.0);
  table.Finalize();
  const Featurizer f(BuildVocabs(items), &table, TimeZone("UTC"));
  QuantizedShingle late = items[0];
  late.shingle.start_ts = kMonday + 2 * 86400 + 13 * 3600 + 1799;  // Wednesday 13:29
  late.shingle.end_ts = late.shingle.start_ts + 100;
  const ExampleFeatures x = f.Featurize(late);
  EXPECT_EQ(x.dow, 2);
  EXPECT_EQ(x.hour_slice, 26);
  EXPECT_EQ(x.target_s, 100.0);
  EXPECT_NE(x.route, Vocab::kAbsent);
  ASSERT_EQ(x.quanta.size(), 3u);
  EXPECT_EQ(x.quanta[1].kind, QuantumKind::kStop);
  EXPECT_EQ(x.quanta[1].d, 0.0);
  EXPECT_EQ(x.quanta[0].d, 500.0);
  for (const auto& q : x.quanta) {
    for (int l = 0; l < kNumCellLevels; ++l) EXPECT_NE(q.cells[l], Vocab::kAbsent);
    if (q.kind == QuantumKind::kSegment) EXPECT_GT(q.s, 0.0);
  }
  const ExampleFeatures y = f.Featurize(items[0]);
  EXPECT_EQ(y.quanta[0].s, 5.0);
  EXPECT_EQ(y.quanta[0].traffic_flag, TrafficSource::kExact);
}

TEST(FeaturizerTest, LocalTimezone) {
  TrafficTable table;
  const Featurizer f(BuildVocabs(TwoRoutes()), &table, TimeZone("Europe/Berlin"));
  // 23:45 UTC on Sunday is 00:45 Monday in Berlin in winter.
  const auto x = f.FeaturizeQuery({"f", "r1", {"a", "b"}}, "s", kMonday - 900, {});
  EXPECT_EQ(x.dow, 0);
  EXPECT_EQ(x.hour_slice, 1);
}

TEST(FeaturizerTest, OptionsAndOov) {
  TrafficTable table;
  FeatureOptions opts;
  opts.use_time = false;
  opts.use_route = false;
  opts.use_cells = {false, true, true};
  opts.constant_speed_mps = 7.5;
  const Featurizer f(BuildVocabs(TwoRoutes()), &table, TimeZone(), opts);
  const auto x = f.Featurize(TwoRoutes()[0]);
  EXPECT_EQ(x.hour_slice, kAbsentTime);
  EXPECT_EQ(x.dow, kAbsentTime);
  EXPECT_EQ(x.route, Vocab::kAbsent);
  EXPECT_EQ(x.quanta[0].cells[0], Vocab::kAbsent);
  EXPECT_NE(x.quanta[0].cells[1], Vocab::kAbsent);
  EXPECT_EQ(x.quanta[0].s, 7.5);

  const Featurizer plain(BuildVocabs(TwoRoutes()), &table, TimeZone());
  const auto unseen = Item("r9", kMonday, 10, {Segment(0, 10, {-40.0, 100.0})});
  const auto u = plain.Featurize(unseen);
  EXPECT_EQ(u.route, Vocab::kAbsent);
  for (int l = 0; l < kNumCellLevels; ++l) EXPECT_EQ(u.quanta[0].cells[l], Vocab::kAbsent);
  EXPECT_THROW(Featurizer(Vocabs{}, nullptr, TimeZone()), Error);
}

TEST(FeaturizerTest, Deterministic) {
  TrafficTable table(5, 9.0);
  const Featurizer f(BuildVocabs(TwoRoutes()), &table, TimeZone());
  const auto a = f.Featurize(TwoRoutes()[0]);
  const auto b = f.Featurize(TwoRoutes()[0]);
  ASSERT_EQ(a.quanta.size(), b.quanta.size());
  for (size_t k = 0; k < a.quanta.size(); ++k) {
    EXPECT_EQ(a.quanta[k].cells, b.quanta[k].cells);
    EXPECT_EQ(a.quanta[k].s, b.quanta[k].s);
  }
}

ExampleFeatures Full() {
  ExampleFeatures x;
  x.route = 3;
  x.hour_slice = 10;
  x.dow = 4;
  x.target_s = 42.0;
  for (int k = 0; k < 4; ++k) {
    QuantumFeatures q;
    q.kind = k % 2 ? QuantumKind::kStop : QuantumKind::kSegment;
    q.cells = {k + 1, k + 2, k + 3};
    q.d = 100.0 * k;
    q.s = 5.0 + k;
    x.quanta.push_back(q);
  }
  return x;
}

TEST(SiaTest, LevelRule) {
  ExampleFeatures x = Full();
  ApplySiaOutcome(x, SiaOutcome::kLevel12_5);
  EXPECT_EQ(x.route, Vocab::kAbsent);
  for (size_t k = 0; k < x.quanta.size(); ++k) {
    EXPECT_EQ(x.quanta[k].cells[0], Vocab::kAbsent);
    EXPECT_EQ(x.quanta[k].cells[1], Vocab::kAbsent);
    EXPECT_EQ(x.quanta[k].cells[2], static_cast<int32_t>(k) + 3);
  }
  ExampleFeatures y = Full();
  ApplySiaOutcome(y, SiaOutcome::kKeepAll);
  EXPECT_EQ(y.route, 3);
  EXPECT_EQ(y.quanta[2].cells, (std::array<int32_t, 3>{3, 4, 5}));
  ExampleFeatures z = Full();
  ApplySiaOutcome(z, SiaOutcome::kLevel4_5);
  for (const auto& q : z.quanta) EXPECT_EQ(q.cells, (std::array<int32_t, 3>{0, 0, 0}));
}

TEST(SiaTest, EmpiricalRates) {
  Rng rng(17);
  const AblationPolicy policy;
  std::array<int, 4> counts{};
  const int n = 100000;
  const ExampleFeatures base = Full();
  for (int k = 0; k < n; ++k) {
    SiaOutcome o;
    const ExampleFeatures x = ApplySia(base, rng, policy, &o);
    ++counts[static_cast<int>(o)];
    // Numeric inputs never change, and any cell ablation clears the route.
    EXPECT_EQ(x.target_s, base.target_s);
    bool any_cell = false;
    for (size_t q = 0; q < x.quanta.size(); ++q) {
      EXPECT_EQ(x.quanta[q].d, base.quanta[q].d);
      EXPECT_EQ(x.quanta[q].s, base.quanta[q].s);
      for (int32_t c : x.quanta[q].cells) any_cell |= c == Vocab::kAbsent;
    }
    if (any_cell) EXPECT_EQ(x.route, Vocab::kAbsent);
  }
  const double want[4] = {0.2, 0.1, 0.1, 0.6};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(counts[k] / static_cast<double>(n), want[k], 0.01) << k;
}

TEST(SiaTest, PolicyValidation) {
  EXPECT_NO_THROW(AblationPolicy{}.Validate());
  EXPECT_THROW((AblationPolicy{{0.5, 0.4, 0.2}}).Validate(), Error);
  EXPECT_THROW((AblationPolicy{{-0.1, 0.0, 0.0}}).Validate(), Error);
}

}  // namespace
}  // namespace bustr
