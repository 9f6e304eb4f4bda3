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

#include <algorithm>
#include <istream>
#include <ostream>

#include "bustr/error.h"

namespace bustr {

Vocab Vocab::Build(std::string name, std::vector<std::string> tokens) {
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  Vocab v;
  v.name_ = std::move(name);
  v.tokens_ = std::move(tokens);
  v.index_.reserve(v.tokens_.size());
  for (size_t i = 0; i < v.tokens_.size(); ++i) {
    v.index_.emplace(v.tokens_[i], static_cast<int32_t>(i + 1));
  }
  return v;
}

int32_t Vocab::IndexOf(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kAbsent : it->second;
}

const std::string& Vocab::Token(int32_t index) const {
  if (index < 1 || index > static_cast<int32_t>(tokens_.size())) {
    throw Error(ErrorCode::kInvalidArgument,
                "vocab " + name_ + " index out of range: " + std::to_string(index));
  }
  return tokens_[index - 1];
}

uint64_t Vocab::Hash() const {
  std::string joined;
  for (const auto& t : tokens_) {
    joined += t;
    joined += '\n';
  }
  return Fnv1a64(joined);
}

void Vocab::Write(std::ostream& out) const {
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::Read(std::string name, std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  Vocab v = Build(std::move(name), tokens);
  if (v.tokens_ != tokens) {
    throw Error(ErrorCode::kParse, "vocab file " + v.name_ + " is not sorted and unique");
  }
  return v;
}

Vocabs BuildVocabs(std::span<const QuantizedShingle> train) {
  if (train.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot build vocabularies from an empty training set");
  }
  std::vector<std::string> routes;
  std::array<std::vector<std::string>, kNumCellLevels> cells;
  for (const auto& item : train) {
    routes.push_back(item.shingle.route.Token());
    for (const auto& q : item.quanta) {
      for (int l = 0; l < kNumCellLevels; ++l) cells[l].push_back(q.cells[l].ToString());
    }
  }
  Vocabs v;
  v.route = Vocab::Build("route", std::move(routes));
  for (int l = 0; l < kNumCellLevels; ++l) {
    v.cells[l] = Vocab::Build(std::string("cell_") + kCellLevelNames[l], std::move(cells[l]));
  }
  return v;
}

std::vector<TrafficStep> TrafficTimestamps(int64_t start_ts, const std::string& shape_id,
                                           std::span<const Quantum> quanta,
                                           const TrafficTable& traffic) {
  std::vector<TrafficStep> out;
  double t = static_cast<double>(start_ts);
  for (const auto& q : quanta) {
    if (q.kind != QuantumKind::kSegment) continue;
    const SpeedLookup s = traffic.Lookup({shape_id, q.segment_index}, t);
    out.push_back({t, s.speed_mps, s.source});
    t += q.traversed_m / s.speed_mps;
  }
  return out;
}

Featurizer::Featurizer(Vocabs vocabs, const TrafficTable* traffic, TimeZone tz,
                       FeatureOptions options)
    : vocabs_(std::move(vocabs)), traffic_(traffic), tz_(std::move(tz)), options_(options) {
  if (traffic_ == nullptr && !options_.constant_speed_mps) {
    throw Error(ErrorCode::kInvalidArgument, "featurizer needs a traffic table or a constant speed");
  }
  if (options_.constant_speed_mps && !(*options_.constant_speed_mps > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "constant speed must be positive");
  }
}

ExampleFeatures Featurizer::FeaturizeQuery(const RouteKey& route, const std::string& shape_id,
                                           int64_t start_ts,
                                           std::span<const Quantum> quanta) const {
  ExampleFeatures x;
  x.route = options_.use_route ? vocabs_.route.IndexOf(route.Token()) : Vocab::kAbsent;
  if (options_.use_time) {
    const TimeOfWeek tow = LocalTimeOfWeek(start_ts, tz_);
    x.hour_slice = tow.half_hour_slice;
    x.dow = tow.day_of_week;
  } else {
    x.hour_slice = kAbsentTime;
    x.dow = kAbsentTime;
  }
  std::vector<TrafficStep> steps;
  if (!options_.constant_speed_mps) steps = TrafficTimestamps(start_ts, shape_id, quanta, *traffic_);
  size_t seg = 0;
  x.quanta.reserve(quanta.size());
  for (const auto& q : quanta) {
    QuantumFeatures f;
    f.kind = q.kind;
    for (int l = 0; l < kNumCellLevels; ++l) {
      f.cells[l] = options_.use_cells[l] ? vocabs_.cells[l].IndexOf(q.cells[l].ToString())
                                         : Vocab::kAbsent;
    }
    if (q.kind == QuantumKind::kSegment) {
      f.d = q.traversed_m;
      if (options_.constant_speed_mps) {
        f.s = *options_.constant_speed_mps;
        f.traffic_flag = TrafficSource::kGlobalMean;
      } else {
        f.s = steps[seg].speed_mps;
        f.traffic_flag = steps[seg].source;
      }
      ++seg;
    }
    x.quanta.push_back(f);
  }
  return x;
}

ExampleFeatures Featurizer::Featurize(const Shingle& shingle,
                                      std::span<const Quantum> quanta) const {
  ExampleFeatures x = FeaturizeQuery(shingle.route, shingle.shape_id, shingle.start_ts, quanta);
  x.target_s = shingle.duration_s();
  return x;
}

void AblationPolicy::Validate() const {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "ablation rate outside [0, 1]");
    }
    sum += v;
  }
  if (sum > 1.0 + 1e-12) throw Error(ErrorCode::kInvalidArgument, "ablation rates sum above 1");
}

SiaOutcome DrawSia(Rng& rng, const AblationPolicy& policy) {
  const double u = rng.Uniform();
  double acc = 0.0;
  for (int l = 0; l < kNumCellLevels; ++l) {
    acc += policy.p[l];
    if (u < acc) return static_cast<SiaOutcome>(l);
  }
  return SiaOutcome::kKeepAll;
}

void ApplySiaOutcome(ExampleFeatures& example, SiaOutcome outcome) {
  if (outcome == SiaOutcome::kKeepAll) return;
  // Levels are stored finest first, so "level L and finer" is [0, L].
  const int upto = static_cast<int>(outcome);
  example.route = Vocab::kAbsent;
  for (auto& q : example.quanta) {
    for (int l = 0; l <= upto; ++l) q.cells[l] = Vocab::kAbsent;
  }
}

ExampleFeatures ApplySia(const ExampleFeatures& example, Rng& rng,
                         const AblationPolicy& policy, SiaOutcome* outcome) {
  const SiaOutcome o = DrawSia(rng, policy);
  if (outcome != nullptr) *outcome = o;
  ExampleFeatures out = example;
  ApplySiaOutcome(out, o);
  return out;
}

}  // namespace bustr
