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

// Simple baselines, feature-ablation harness and novelty slices.

#ifndef BUSTR_BASELINES_EVAL_H_
#define BUSTR_BASELINES_EVAL_H_

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bustr/featurizer.h"
#include "bustr/metrics.h"
#include "bustr/trainer.h"

namespace bustr {

// Sum of d/s over segment quanta; stops add nothing.
double CarBaseline(const ExampleFeatures& x);

// (n_stops, distance_m, car_time_s) of one example.
std::array<double, 3> LinearFeaturesOf(const ExampleFeatures& x);

// Least squares on (1, n_stops, distance_m, car_time_s). Features are
// centred and scaled before solving the ridge-jittered normal equations, so
// a constant feature gets weight 0 and the intercept absorbs it.
class LinearBaseline {
 public:
  static constexpr double kRidge = 1e-8;

  // Error(kInvalidArgument) with fewer than 4 examples, Error(kNumerical) if
  // the system cannot be solved.
  static LinearBaseline Fit(std::span<const ExampleFeatures> train);

  double Predict(const ExampleFeatures& x) const;
  // intercept, n_stops, distance_m, car_time_s
  const std::array<double, 4>& weights() const { return w_; }

 private:
  std::array<double, 4> w_{};
};

// Mean speed over the segment quanta of the examples.
double MeanSegmentSpeed(std::span<const ExampleFeatures> xs);

enum class Variant {
  kFull,
  kTrafficAblated,
  kRouteAblated,
  kRouteL15Ablated,
  kAllSpatialAblated,
  kTimeAblated,
  kGenericNumeric,
  kNoCoarseCells,
  kNoSia,
  kNoFeatureSelection,
};

// Error(kInvalidArgument) for an unknown name.
Variant ParseVariant(const std::string& name);
const char* VariantName(Variant v);
std::vector<Variant> AllVariants();

struct VariantSetup {
  FeatureOptions features;
  TrainConfig config;
};

// Feature options and training config for a variant. The traffic-ablated
// variant replaces every speed with `mean_speed_mps`.
VariantSetup ApplyVariant(Variant v, const TrainConfig& base, double mean_speed_mps);

struct EvalData;

// ApplyVariant with the mean speed taken from the training split.
VariantSetup PrepareVariant(Variant v, const EvalData& data, const TrainConfig& config);

struct NoveltySlices {
  std::vector<size_t> new_routes;  // route token not in the route vocab
  std::vector<size_t> new_areas;   // some level-12.5 cell not in its vocab
};

NoveltySlices ComputeNoveltySlices(std::span<const QuantizedShingle> examples,
                                   const Vocabs& train_vocabs);

struct EvalReport {
  std::string variant;
  std::string slice;
  std::vector<double> trial_mape;
  double mean = 0.0;
  double stdev = 0.0;  // sample standard deviation, 0 for one trial
  size_t n = 0;        // examples in the slice

  void Summarize();
};

struct EvalData {
  std::span<const QuantizedShingle> train;
  std::span<const QuantizedShingle> validation;
  std::span<const QuantizedShingle> test;
  const TrafficTable* traffic = nullptr;
  TimeZone timezone;
};

// Predictions of a trained model on `items`, featurized with its own
// vocabularies and options.
std::vector<double> PredictItems(const TrainedModel& model, std::span<const QuantizedShingle> items,
                                 const TrafficTable* traffic, const TimeZone& tz);

// MAPE on the "all", "new_routes" and "new_areas" slices; empty slices are
// left out.
std::vector<EvalReport> EvaluateSlices(const std::string& variant,
                                       std::span<const QuantizedShingle> test,
                                       std::span<const double> preds, const Vocabs& train_vocabs);

struct AblationResult {
  std::vector<EvalReport> reports;  // one per slice
  TrainedModel last_model;          // model of the final trial
};

// Trains and evaluates `trials` models of a variant. Trial 0 uses the
// config seed; trial t > 0 derives its seed from it.
AblationResult AblationRun(Variant v, const EvalData& data, const TrainConfig& config,
                           int trials = 1, const ProgressFn& progress = nullptr);

struct BaselineReport {
  double car_mape = 0.0;
  double linear_mape = 0.0;
  LinearBaseline linear;
};

// Both baselines, fitted on train and scored on test.
BaselineReport RunBaselines(const EvalData& data);

// CSV: variant,slice,trial,mape.
void WriteEvalCsv(std::ostream& out, std::span<const EvalReport> reports);
// {variant: {slice: {mean, stdev, n, trials}}}
nlohmann::ordered_json EvalSummaryJson(std::span<const EvalReport> reports);

}  // namespace bustr

#endif  // BUSTR_BASELINES_EVAL_H_
