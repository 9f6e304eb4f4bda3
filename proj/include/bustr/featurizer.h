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

#ifndef BUSTR_FEATURIZER_H_
#define BUSTR_FEATURIZER_H_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bustr/ingest.h"
#include "bustr/rng.h"
#include "bustr/shingler.h"
#include "bustr/timeutil.h"

namespace bustr {

// Token <-> dense index. Index 0 is ABSENT and embeds to zero; every token
// not in the vocabulary maps there.
class Vocab {
 public:
  static constexpr int32_t kAbsent = 0;

  Vocab() = default;
  // Tokens are deduplicated and sorted, so the result is independent of the
  // input order.
  static Vocab Build(std::string name, std::vector<std::string> tokens);

  int32_t IndexOf(std::string_view token) const;
  bool Contains(std::string_view token) const { return IndexOf(token) != kAbsent; }
  // Token for index >= 1.
  const std::string& Token(int32_t index) const;
  // Number of rows including ABSENT.
  size_t size() const { return tokens_.size() + 1; }
  const std::string& name() const { return name_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  uint64_t Hash() const;

  // One token per line; line n holds index n (ABSENT is implicit).
  void Write(std::ostream& out) const;
  static Vocab Read(std::string name, std::istream& in);

 private:
  std::string name_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int32_t> index_;
};

inline constexpr int kNumCellLevels = 3;
inline constexpr const char* kCellLevelNames[kNumCellLevels] = {"15", "12.5", "4.5"};
inline constexpr double kCellLevelValues[kNumCellLevels] = {15.0, 12.5, 4.5};

struct Vocabs {
  Vocab route;
  std::array<Vocab, kNumCellLevels> cells;  // levels 15, 12.5, 4.5
};

// Training split only. Error(kInvalidArgument) on an empty set.
Vocabs BuildVocabs(std::span<const QuantizedShingle> train);

inline constexpr int kHourSlices = 48;
inline constexpr int kDaysOfWeek = 7;
// Marks an ablated time-of-week feature; it embeds to zero.
inline constexpr int32_t kAbsentTime = -1;

struct QuantumFeatures {
  QuantumKind kind = QuantumKind::kSegment;
  std::array<int32_t, kNumCellLevels> cells{};
  double d = 0.0;  // metres traversed (segments)
  double s = 0.0;  // traffic speed, m/s (segments)
  TrafficSource traffic_flag = TrafficSource::kExact;
};

struct ExampleFeatures {
  int32_t route = Vocab::kAbsent;
  int32_t hour_slice = 0;
  int32_t dow = 0;
  std::vector<QuantumFeatures> quanta;
  double target_s = 0.0;
};

struct TrafficStep {
  double lookup_ts = 0.0;
  double speed_mps = 0.0;
  TrafficSource source = TrafficSource::kExact;
};

// Traffic lookup times by car-time extrapolation: the first segment is looked
// up at the interval start, and every later one at the start plus the car
// time d/s of the segments before it. Stops add nothing. One entry per
// segment quantum, in order.
std::vector<TrafficStep> TrafficTimestamps(int64_t start_ts, const std::string& shape_id,
                                           std::span<const Quantum> quanta,
                                           const TrafficTable& traffic);

// Which inputs the featurizer fills in. Disabled features are set to ABSENT;
// a constant speed replaces every traffic lookup.
struct FeatureOptions {
  bool use_route = true;
  bool use_time = true;
  std::array<bool, kNumCellLevels> use_cells{true, true, true};
  std::optional<double> constant_speed_mps;
};

class Featurizer {
 public:
  Featurizer(Vocabs vocabs, const TrafficTable* traffic, TimeZone tz,
             FeatureOptions options = {});

  // Training/eval example; target is the observed duration.
  ExampleFeatures Featurize(const Shingle& shingle, std::span<const Quantum> quanta) const;
  ExampleFeatures Featurize(const QuantizedShingle& item) const {
    return Featurize(item.shingle, item.quanta);
  }
  // Inference: no target.
  ExampleFeatures FeaturizeQuery(const RouteKey& route, const std::string& shape_id,
                                 int64_t start_ts, std::span<const Quantum> quanta) const;

  const Vocabs& vocabs() const { return vocabs_; }
  const FeatureOptions& options() const { return options_; }
  const TimeZone& timezone() const { return tz_; }

 private:
  Vocabs vocabs_;
  const TrafficTable* traffic_;
  TimeZone tz_;
  FeatureOptions options_;
};

// Spatial input ablation. One draw per example: level 15 with p[0], level
// 12.5 with p[1], level 4.5 with p[2], otherwise keep everything. Ablating at
// level L clears the route and every cell at L and finer, for all quanta.
struct AblationPolicy {
  std::array<double, kNumCellLevels> p{0.2, 0.1, 0.1};
  // Error(kInvalidArgument) unless each p is in [0, 1] and they sum to <= 1.
  void Validate() const;
};

enum class SiaOutcome : uint8_t { kLevel15 = 0, kLevel12_5 = 1, kLevel4_5 = 2, kKeepAll = 3 };

SiaOutcome DrawSia(Rng& rng, const AblationPolicy& policy);
void ApplySiaOutcome(ExampleFeatures& example, SiaOutcome outcome);
ExampleFeatures ApplySia(const ExampleFeatures& example, Rng& rng,
                         const AblationPolicy& policy, SiaOutcome* outcome = nullptr);

}  // namespace bustr

#endif  // BUSTR_FEATURIZER_H_
