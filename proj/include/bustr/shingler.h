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

// Trajectory shingling and quantum decomposition.
//
// A shingle is a trip interval delimited by two observed (never
// interpolated) position reports. Extraction rules, per trajectory:
//
//  * one minimum-length draw, uniform in [min_len_lo_m, min_len_hi_m];
//  * endpoints only at reports farther than stop_exclusion_m from every stop;
//  * starts are visited in time order; a start within min_start_spacing_s of
//    the previously emitted start is skipped;
//  * a start ends at the first later admissible report at least the drawn
//    length further along;
//  * shingles spanning a consecutive-report gap above max_gap_s or
//    max_gap_m are discarded;
//  * finally, average speed must lie in [min_speed_kmh, max_speed_kmh].

#ifndef BUSTR_SHINGLER_H_
#define BUSTR_SHINGLER_H_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bustr/ingest.h"
#include "bustr/rng.h"
#include "bustr/spatial_grid.h"

namespace bustr {

struct ShinglerConfig {
  double min_len_lo_m = 1000.0;
  double min_len_hi_m = 5000.0;
  double stop_exclusion_m = 20.0;
  int64_t min_start_spacing_s = 30;
  int64_t max_gap_s = 300;
  double max_gap_m = 3000.0;
  double min_speed_kmh = 0.7;
  double max_speed_kmh = 140.0;
};

struct Shingle {
  int route_index = -1;
  RouteKey route;
  std::string shape_id;
  std::string trace_id;
  double start_m = 0.0;
  double end_m = 0.0;
  int64_t start_ts = 0;
  int64_t end_ts = 0;

  double length_m() const { return end_m - start_m; }
  double duration_s() const { return static_cast<double>(end_ts - start_ts); }
};

enum class QuantumKind : uint8_t { kStop = 0, kSegment = 1 };

struct Quantum {
  QuantumKind kind = QuantumKind::kSegment;
  // Cells at levels 15, 12.5 and 4.5, in that order.
  std::array<CellId, 3> cells;
  // Along-shape start of the quantum: the stop offset, or the clipped start
  // of the traversed part of the segment.
  double position_m = 0.0;
  double traversed_m = 0.0;  // segments only
  int segment_index = -1;    // segments only
  std::string stop_id;       // stops only
};

// Every admissible (start, end) pair is checked against these in order; the
// first failing rule names the rejection counter.
std::vector<Shingle> ExtractShingles(const Trace& trace, const Route& route,
                                     const ShinglerConfig& config, Rng& rng,
                                     Counters* counters = nullptr);

// Same, with the minimum-length draw supplied.
std::vector<Shingle> ExtractShinglesWithDraw(const Trace& trace, const Route& route,
                                             const ShinglerConfig& config,
                                             double min_len_m,
                                             Counters* counters = nullptr);

// Runs extraction over all traces; each trace's stream is seeded from
// (seed, trace id), so the output does not depend on trace order.
std::vector<Shingle> ExtractAllShingles(const Network& network,
                                        std::span<const Trace> traces,
                                        const ShinglerConfig& config, uint64_t seed,
                                        Counters* counters = nullptr);

// Decomposes along-shape intervals into ordered quanta. Cells are taken at a
// segment's end point and at a stop's reported location; they are computed
// once per segment and stop.
class Quantizer {
 public:
  explicit Quantizer(const Network& network);

  enum class Stops {
    kInterior,       // stops strictly inside (start, end): training shingles
    kWithEndpoints,  // stops in [start, end]: stop-to-stop queries
  };

  // Throws Error(kInvalidArgument) when the interval leaves the shape.
  std::vector<Quantum> Quantize(int route_index, double start_m, double end_m,
                                Stops stops = Stops::kInterior) const;
  std::vector<Quantum> Quantize(const Shingle& s) const {
    return Quantize(s.route_index, s.start_m, s.end_m);
  }

  const Network& network() const { return network_; }

 private:
  const Network& network_;
  std::unordered_map<std::string, std::vector<std::array<CellId, 3>>> segment_cells_;
  std::unordered_map<std::string, std::array<CellId, 3>> stop_cells_;
};

std::array<CellId, 3> ModelCells(const LatLng& p);

struct WeekAssignment {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;

  bool empty() const { return train.empty() && validation.empty() && test.empty(); }
};

struct WeekSplit {
  std::vector<size_t> train;
  std::vector<size_t> validation;
  std::vector<size_t> test;
  std::vector<std::string> warnings;
  WeekAssignment weeks;  // the assignment actually used
};

// Partitions examples by the ISO week of their start time. With an empty
// assignment the latest week is test, the one before validation, and all
// earlier weeks train. Examples in unassigned weeks are left out.
WeekSplit SplitByWeek(std::span<const int64_t> start_ts, const WeekAssignment& weeks);

// A shingle with its quanta, as checkpointed between pipeline stages.
struct QuantizedShingle {
  Shingle shingle;
  std::vector<Quantum> quanta;
};

void WriteShinglesJsonl(std::ostream& out, std::span<const QuantizedShingle> items);
std::vector<QuantizedShingle> ReadShinglesJsonl(std::istream& in);

}  // namespace bustr

#endif  // BUSTR_SHINGLER_H_
