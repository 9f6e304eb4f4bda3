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

#include "bustr/baselines_eval.h"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <sstream>

#include "bustr/error.h"
#include "fixtures.h"

namespace bustr {
namespace {

TEST(MapeTest, Examples) {
  EXPECT_DOUBLE_EQ(Mape(std::vector<double>{110}, std::vector<double>{100}), 10.0);
  EXPECT_EQ(Mape(std::vector<double>{3, 4}, std::vector<double>{3, 4}), 0.0);
  EXPECT_DOUBLE_EQ(Mape(std::vector<double>{50, 150}, std::vector<double>{100, 100}), 50.0);
  const std::vector<double> a{12, 7, 30}, b{10, 9, 31};
  EXPECT_NEAR(Mape(std::vector<double>{24, 14, 60}, std::vector<double>{20, 18, 62}), Mape(a, b), 1e-12);
  EXPECT_NEAR(Mape(std::vector<double>{30, 12, 7}, std::vector<double>{31, 10, 9}), Mape(a, b), 1e-12);
  EXPECT_THROW(Mape(std::vector<double>{}, std::vector<double>{}), Error);
  EXPECT_THROW(Mape(std::vector<double>{1}, std::vector<double>{0}), Error);
  EXPECT_THROW(Mape(std::vector<double>{1, 2}, std::vector<double>{1}), Error);
}

QuantumFeatures Seg(double d, double s) {
  QuantumFeatures q;
  q.kind = QuantumKind::kSegment;
  q.d = d;
  q.s = s;
  return q;
}

QuantumFeatures StopQ() {
  QuantumFeatures q;
  q.kind = QuantumKind::kStop;
  return q;
}

TEST(CarBaselineTest, Examples) {
  ExampleFeatures x;
  x.quanta = {Seg(1000, 10), StopQ(), Seg(500, 5)};
  EXPECT_DOUBLE_EQ(CarBaseline(x), 200.0);
  x.quanta = {StopQ(), StopQ()};
  EXPECT_EQ(CarBaseline(x), 0.0);
}

std::vector<ExampleFeatures> RandomExamples(Rng& rng, int n) {
  std::vector<ExampleFeatures> out;
  for (int i = 0; i < n; ++i) {
    ExampleFeatures x;
    const int nq = 1 + static_cast<int>(rng.Below(8));
    for (int k = 0; k < nq; ++k) {
      x.quanta.push_back(rng.Uniform() < 0.3 ? StopQ() : Seg(rng.Uniform(10, 500), rng.Uniform(2, 25)));
    }
    out.push_back(x);
  }
  return out;
}

TEST(LinearBaselineTest, RecoversScaledCarTime) {
  Rng rng(1);
  auto xs = RandomExamples(rng, 400);
  for (auto& x : xs) x.target_s = 2.0 * CarBaseline(x);
  const LinearBaseline fit = LinearBaseline::Fit(xs);
  const auto& w = fit.weights();
  EXPECT_NEAR(w[0], 0.0, 1e-6);
  EXPECT_NEAR(w[1], 0.0, 1e-6);
  EXPECT_NEAR(w[2], 0.0, 1e-6);
  EXPECT_NEAR(w[3], 2.0, 1e-6);
}

TEST(LinearBaselineTest, MatchesNormalEquations) {
  Rng rng(2);
  auto xs = RandomExamples(rng, 200);
  for (auto& x : xs) x.target_s = 20.0 + CarBaseline(x) * 1.4 + rng.Normal(0.0, 5.0) + 10.0 * x.quanta.size();
  Eigen::MatrixXd a(xs.size(), 4);
  Eigen::VectorXd y(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    const auto f = LinearFeaturesOf(xs[i]);
    a.row(i) << 1.0, f[0], f[1], f[2];
    y(i) = xs[i].target_s;
  }
  const Eigen::VectorXd w = a.colPivHouseholderQr().solve(y);
  const LinearBaseline fit = LinearBaseline::Fit(xs);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(fit.weights()[k], w(k), 1e-6 * (1.0 + std::fabs(w(k))));
  EXPECT_NEAR(fit.Predict(xs[0]), a.row(0).dot(w), 1e-6);
}

TEST(LinearBaselineTest, ConstantFeaturesGiveMean) {
  std::vector<ExampleFeatures> xs;
  for (int i = 0; i < 6; ++i) {
    ExampleFeatures x;
    x.quanta = {Seg(100, 10)};
    x.target_s = 10.0 + i;
    xs.push_back(x);
  }
  const LinearBaseline fit = LinearBaseline::Fit(xs);
  EXPECT_NEAR(fit.weights()[0], 12.5, 1e-9);
  EXPECT_NEAR(fit.Predict(xs[0]), 12.5, 1e-9);
  xs.resize(3);
  EXPECT_THROW(LinearBaseline::Fit(xs), Error);
}

TEST(VariantTest, NamesAndSetup) {
  for (Variant v : AllVariants()) EXPECT_EQ(ParseVariant(VariantName(v)), v);
  EXPECT_THROW(ParseVariant("nope"), Error);
  const TrainConfig base;
  const auto traffic = ApplyVariant(Variant::kTrafficAblated, base, 7.25);
  EXPECT_EQ(traffic.features.constant_speed_mps, 7.25);
  const auto spatial = ApplyVariant(Variant::kAllSpatialAblated, base, 1.0);
  EXPECT_FALSE(spatial.features.use_route);
  EXPECT_EQ(spatial.features.use_cells, (std::array<bool, 3>{false, false, false}));
  EXPECT_TRUE(ApplyVariant(Variant::kGenericNumeric, base, 1.0).config.model.generic_numeric_inputs);
  EXPECT_FALSE(ApplyVariant(Variant::kNoSia, base, 1.0).config.use_sia);
  const auto coarse = ApplyVariant(Variant::kNoCoarseCells, base, 1.0);
  EXPECT_EQ(coarse.features.use_cells, (std::array<bool, 3>{true, false, false}));
  std::vector<ExampleFeatures> xs(1);
  xs[0].quanta = {Seg(100, 4), StopQ(), Seg(100, 8)};
  EXPECT_DOUBLE_EQ(MeanSegmentSpeed(xs), 6.0);
}

TEST(NoveltyTest, Slices) {
  Rng rng(3);
  const auto train = testing::Corridor(rng, 100);
  const Vocabs v = BuildVocabs(train);
  std::vector<QuantizedShingle> test{train[0]};
  QuantizedShingle new_route = train[1];
  new_route.shingle.route.public_route_id = "other";
  test.push_back(new_route);
  QuantizedShingle new_area = train[2];
  new_area.quanta[0].cells = ModelCells({-33.9, 151.2});
  test.push_back(new_area);
  const auto held = testing::Corridor(rng, 20, 24.0, "x");
  test.insert(test.end(), held.begin(), held.end());
  const NoveltySlices s = ComputeNoveltySlices(test, v);
  std::vector<size_t> want_routes{1}, want_areas{2};
  for (size_t i = 3; i < test.size(); ++i) {
    want_routes.push_back(i);
    want_areas.push_back(i);
  }
  EXPECT_EQ(s.new_routes, want_routes);
  EXPECT_EQ(s.new_areas, want_areas);
}

TEST(ReportTest, SummaryAndCsv) {
  EvalReport r{"full", "all", {10.0, 12.0, 14.0}};
  r.n = 5;
  r.Summarize();
  EXPECT_DOUBLE_EQ(r.mean, 12.0);
  EXPECT_DOUBLE_EQ(r.stdev, 2.0);
  std::ostringstream out;
  const std::vector<EvalReport> reports{r};
  WriteEvalCsv(out, reports);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "variant,slice,trial,mape");
  const auto j = EvalSummaryJson(reports);
  EXPECT_EQ(j["full"]["all"]["n"], 5);
}

TrainConfig Quick() {
  TrainConfig c;
  c.steps = 200;
  c.batch = 16;
  c.learning_rate = 0.05;
  c.decay_every = 20;
  c.eval_every = 50;
  c.model.hidden = 8;
  c.seed = 5;
  return c;
}

struct Data {
  std::vector<QuantizedShingle> train, validation, test;
  TrafficTable traffic{5, 10.0};
  EvalData View() const { return {train, validation, test, &traffic, TimeZone()}; }
};

Data MakeData() {
  Rng rng(4);
  Data d;
  d.train = testing::Corridor(rng, 200);
  d.validation = testing::Corridor(rng, 60);
  d.test = testing::Corridor(rng, 60);
  return d;
}

TEST(AblationTest, FullEqualsTrainFull) {
  const Data d = MakeData();
  const AblationResult r = AblationRun(Variant::kFull, d.View(), Quick());
  const TrainedModel m = TrainFull({d.train, d.validation, &d.traffic, TimeZone(), {}}, Quick());
  EXPECT_TRUE(r.last_model.params == m.params);
  ASSERT_FALSE(r.reports.empty());
  EXPECT_EQ(r.reports[0].slice, "all");
  const auto preds = PredictItems(m, d.test, &d.traffic, TimeZone());
  std::vector<double> actual;
  for (const auto& it : d.test) actual.push_back(it.shingle.duration_s());
  EXPECT_NEAR(r.reports[0].mean, Mape(preds, actual), 1e-12);
}

TEST(AblationTest, RouteTableNeverRead) {
  const Data d = MakeData();
  const AblationResult r = AblationRun(Variant::kRouteAblated, d.View(), Quick());
  TrainedModel m = r.last_model;
  const auto before = PredictItems(m, d.test, &d.traffic, TimeZone());
  for (double& v : m.params.tables[kRouteTable].data) v += 100.0;
  EXPECT_EQ(PredictItems(m, d.test, &d.traffic, TimeZone()), before);
}

TEST(AblationTest, TrialsUseDistinctSeeds) {
  const Data d = MakeData();
  const AblationResult r = AblationRun(Variant::kNoSia, d.View(), Quick(), 2);
  ASSERT_EQ(r.reports[0].trial_mape.size(), 2u);
  EXPECT_NE(r.reports[0].trial_mape[0], r.reports[0].trial_mape[1]);
}

TEST(BaselineReportTest, Runs) {
  const Data d = MakeData();
  const BaselineReport b = RunBaselines(d.View());
  EXPECT_GT(b.car_mape, b.linear_mape);
  EXPECT_GT(b.linear_mape, 0.0);
}

}  // namespace
}  // namespace bustr
