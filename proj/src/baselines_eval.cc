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

#include <cmath>
#include <ostream>

#include <Eigen/Dense>

#include "bustr/error.h"

namespace bustr {

double CarBaseline(const ExampleFeatures& x) {
  double t = 0.0;
  for (const auto& q : x.quanta) {
    if (q.kind != QuantumKind::kSegment) continue;
    if (!(q.s > 0.0)) throw Error(ErrorCode::kInvalidArgument, "segment without a speed");
    t += q.d / q.s;
  }
  return t;
}

std::array<double, 3> LinearFeaturesOf(const ExampleFeatures& x) {
  std::array<double, 3> f{0.0, 0.0, 0.0};
  for (const auto& q : x.quanta) {
    if (q.kind == QuantumKind::kStop) {
      f[0] += 1.0;
    } else {
      f[1] += q.d;
    }
  }
  f[2] = CarBaseline(x);
  return f;
}

LinearBaseline LinearBaseline::Fit(std::span<const ExampleFeatures> train) {
  if (train.size() < 4) {
    throw Error(ErrorCode::kInvalidArgument, "linear baseline needs at least 4 examples");
  }
  const double n = static_cast<double>(train.size());
  std::vector<std::array<double, 3>> feats;
  feats.reserve(train.size());
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  double tmean = 0.0;
  for (const auto& x : train) {
    feats.push_back(LinearFeaturesOf(x));
    for (int j = 0; j < 3; ++j) mean[j] += feats.back()[j];
    tmean += x.target_s;
  }
  mean /= n;
  tmean /= n;
  Eigen::Vector3d scale = Eigen::Vector3d::Zero();
  for (const auto& f : feats) {
    for (int j = 0; j < 3; ++j) scale[j] += (f[j] - mean[j]) * (f[j] - mean[j]);
  }
  for (int j = 0; j < 3; ++j) scale[j] = std::sqrt(scale[j] / n);

  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < feats.size(); ++i) {
    Eigen::Vector3d z;
    for (int j = 0; j < 3; ++j) z[j] = scale[j] > 0.0 ? (feats[i][j] - mean[j]) / scale[j] : 0.0;
    a += z * z.transpose();
    b += z * (train[i].target_s - tmean);
  }
  a /= n;
  b /= n;
  a += kRidge * Eigen::Matrix3d::Identity();
  const Eigen::LLT<Eigen::Matrix3d> llt(a);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumerical, "linear baseline normal equations are singular");
  }
  const Eigen::Vector3d wz = llt.solve(b);
  LinearBaseline out;
  out.w_[0] = tmean;
  for (int j = 0; j < 3; ++j) {
    const double w = scale[j] > 0.0 ? wz[j] / scale[j] : 0.0;
    out.w_[j + 1] = w;
    out.w_[0] -= w * mean[j];
  }
  for (double w : out.w_) {
    if (!std::isfinite(w)) throw Error(ErrorCode::kNumerical, "linear baseline weights not finite");
  }
  return out;
}

double LinearBaseline::Predict(const ExampleFeatures& x) const {
  const auto f = LinearFeaturesOf(x);
  return w_[0] + w_[1] * f[0] + w_[2] * f[1] + w_[3] * f[2];
}

double MeanSegmentSpeed(std::span<const ExampleFeatures> xs) {
  double sum = 0.0;
  size_t n = 0;
  for (const auto& x : xs) {
    for (const auto& q : x.quanta) {
      if (q.kind != QuantumKind::kSegment) continue;
      sum += q.s;
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "no segment quanta for a mean speed");
  return sum / static_cast<double>(n);
}

namespace {

constexpr std::pair<Variant, const char*> kVariantNames[] = {
    {Variant::kFull, "full"},
    {Variant::kTrafficAblated, "traffic_ablated"},
    {Variant::kRouteAblated, "route_ablated"},
    {Variant::kRouteL15Ablated, "route_l15_ablated"},
    {Variant::kAllSpatialAblated, "all_spatial_ablated"},
    {Variant::kTimeAblated, "time_ablated"},
    {Variant::kGenericNumeric, "generic_numeric"},
    {Variant::kNoCoarseCells, "no_coarse_cells"},
    {Variant::kNoSia, "no_sia"},
    {Variant::kNoFeatureSelection, "no_feature_selection"},
};

}  // namespace

Variant ParseVariant(const std::string& name) {
  for (const auto& [v, n] : kVariantNames) {
    if (name == n) return v;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown variant " + name);
}

const char* VariantName(Variant v) {
  for (const auto& [vv, n] : kVariantNames) {
    if (vv == v) return n;
  }
  return "?";
}

std::vector<Variant> AllVariants() {
  std::vector<Variant> out;
  for (const auto& [v, n] : kVariantNames) out.push_back(v);
  return out;
}

VariantSetup ApplyVariant(Variant v, const TrainConfig& base, double mean_speed_mps) {
  VariantSetup s{FeatureOptions{}, base};
  switch (v) {
    case Variant::kFull:
      break;
    case Variant::kTrafficAblated:
      s.features.constant_speed_mps = mean_speed_mps;
      break;
    case Variant::kRouteAblated:
      s.features.use_route = false;
      break;
    case Variant::kRouteL15Ablated:
      s.features.use_route = false;
      s.features.use_cells[0] = false;
      break;
    case Variant::kAllSpatialAblated:
      s.features.use_route = false;
      s.features.use_cells = {false, false, false};
      break;
    case Variant::kTimeAblated:
      s.features.use_time = false;
      break;
    case Variant::kGenericNumeric:
      s.config.model.generic_numeric_inputs = true;
      break;
    case Variant::kNoCoarseCells:
      s.features.use_cells[1] = false;
      s.features.use_cells[2] = false;
      break;
    case Variant::kNoSia:
      s.config.use_sia = false;
      break;
    case Variant::kNoFeatureSelection:
      s.config.feature_selection = false;
      break;
  }
  return s;
}

NoveltySlices ComputeNoveltySlices(std::span<const QuantizedShingle> examples,
                                   const Vocabs& train_vocabs) {
  NoveltySlices out;
  for (size_t i = 0; i < examples.size(); ++i) {
    const auto& e = examples[i];
    if (!train_vocabs.route.Contains(e.shingle.route.Token())) out.new_routes.push_back(i);
    for (const auto& q : e.quanta) {
      if (!train_vocabs.cells[1].Contains(q.cells[1].ToString())) {
        out.new_areas.push_back(i);
        break;
      }
    }
  }
  return out;
}

void EvalReport::Summarize() {
  const double k = static_cast<double>(trial_mape.size());
  mean = 0.0;
  for (double m : trial_mape) mean += m;
  mean = trial_mape.empty() ? 0.0 : mean / k;
  double ss = 0.0;
  for (double m : trial_mape) ss += (m - mean) * (m - mean);
  stdev = trial_mape.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
}

std::vector<double> PredictItems(const TrainedModel& model, std::span<const QuantizedShingle> items,
                                 const TrafficTable* traffic, const TimeZone& tz) {
  const Featurizer fz(model.vocabs, traffic, tz, model.features);
  std::vector<double> out;
  out.reserve(items.size());
  ForwardTrace trace;
  for (const auto& it : items) out.push_back(Forward(fz.Featurize(it), model.params, trace));
  return out;
}

std::vector<EvalReport> EvaluateSlices(const std::string& variant,
                                       std::span<const QuantizedShingle> test,
                                       std::span<const double> preds, const Vocabs& train_vocabs) {
  if (preds.size() != test.size()) throw Error(ErrorCode::kMismatch, "prediction count");
  std::vector<double> actual;
  actual.reserve(test.size());
  for (const auto& t : test) actual.push_back(t.shingle.duration_s());
  const NoveltySlices slices = ComputeNoveltySlices(test, train_vocabs);
  std::vector<EvalReport> out;
  const auto add = [&](const char* name, const std::vector<size_t>* idx) {
    std::vector<double> p, a;
    if (idx == nullptr) {
      p.assign(preds.begin(), preds.end());
      a = actual;
    } else {
      for (size_t i : *idx) {
        p.push_back(preds[i]);
        a.push_back(actual[i]);
      }
    }
    if (p.empty()) return;
    EvalReport r;
    r.variant = variant;
    r.slice = name;
    r.n = p.size();
    r.trial_mape.push_back(Mape(p, a));
    r.Summarize();
    out.push_back(std::move(r));
  };
  add("all", nullptr);
  add("new_routes", &slices.new_routes);
  add("new_areas", &slices.new_areas);
  return out;
}

VariantSetup PrepareVariant(Variant v, const EvalData& data, const TrainConfig& config) {
  double mean_speed = 0.0;
  if (v == Variant::kTrafficAblated) {
    const Featurizer fz(BuildVocabs(data.train), data.traffic, data.timezone);
    mean_speed = MeanSegmentSpeed(FeaturizeAll(fz, data.train));
  }
  return ApplyVariant(v, config, mean_speed);
}

AblationResult AblationRun(Variant v, const EvalData& data, const TrainConfig& config, int trials,
                           const ProgressFn& progress) {
  if (trials < 1) throw Error(ErrorCode::kInvalidArgument, "trials must be >= 1");
  if (data.test.empty()) throw Error(ErrorCode::kInvalidArgument, "empty test split");
  const Vocabs train_vocabs = BuildVocabs(data.train);
  const VariantSetup base = PrepareVariant(v, data, config);
  AblationResult result;
  for (int t = 0; t < trials; ++t) {
    VariantSetup setup = base;
    if (t > 0) setup.config.seed = DeriveSeed(config.seed, static_cast<uint64_t>(t));
    TrainInputs in{data.train, data.validation, data.traffic, data.timezone, setup.features};
    TrainedModel model = TrainFull(in, setup.config, progress);
    const auto preds = PredictItems(model, data.test, data.traffic, data.timezone);
    const auto reports = EvaluateSlices(VariantName(v), data.test, preds, train_vocabs);
    for (const auto& r : reports) {
      auto it = std::find_if(result.reports.begin(), result.reports.end(),
                             [&](const EvalReport& e) { return e.slice == r.slice; });
      if (it == result.reports.end()) {
        result.reports.push_back(r);
      } else {
        it->trial_mape.push_back(r.trial_mape[0]);
        it->Summarize();
      }
    }
    result.last_model = std::move(model);
  }
  return result;
}

BaselineReport RunBaselines(const EvalData& data) {
  const Vocabs vocabs = BuildVocabs(data.train);
  const Featurizer fz(vocabs, data.traffic, data.timezone);
  const auto train = FeaturizeAll(fz, data.train);
  const auto test = FeaturizeAll(fz, data.test);
  BaselineReport out;
  out.linear = LinearBaseline::Fit(train);
  std::vector<double> car, lin, actual;
  for (const auto& x : test) {
    car.push_back(CarBaseline(x));
    lin.push_back(out.linear.Predict(x));
    actual.push_back(x.target_s);
  }
  out.car_mape = Mape(car, actual);
  out.linear_mape = Mape(lin, actual);
  return out;
}

void WriteEvalCsv(std::ostream& out, std::span<const EvalReport> reports) {
  out << "variant,slice,trial,mape\n";
  for (const auto& r : reports) {
    for (size_t t = 0; t < r.trial_mape.size(); ++t) {
      out << r.variant << ',' << r.slice << ',' << t << ','
          << nlohmann::json(r.trial_mape[t]).dump() << '\n';
    }
  }
}

nlohmann::ordered_json EvalSummaryJson(std::span<const EvalReport> reports) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& r : reports) {
    j[r.variant][r.slice] = {{"mean", r.mean}, {"stdev", r.stdev}, {"n", r.n},
                             {"trials", r.trial_mape.size()}};
  }
  return j;
}

}  // namespace bustr
