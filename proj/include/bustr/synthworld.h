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

// Synthetic transit world with known bus dynamics.
//
// Cities are street grids; routes follow the grid and run in both
// directions. Each city is split into four districts by the quadrant of a
// point's level-12.5 cell centre. A bus covers ground at rate
//
//   dt/dx = alpha / s(x, t) + beta      (seconds per metre)
//
// with (alpha, beta) taken from the district of the segment's end point and
// s the true traffic speed, piecewise constant per segment and per traffic
// bucket. It dwells at every stop. Integrating this rate exactly gives
// segment time alpha*d/s + beta*d whenever s holds over the segment.

#ifndef BUSTR_SYNTHWORLD_H_
#define BUSTR_SYNTHWORLD_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bustr/ingest.h"

namespace bustr {

struct DistrictLaw {
  double alpha = 1.0;    // multiplier on car time
  double beta = 0.0;     // extra seconds per metre
  double dwell_s = 0.0;  // base dwell at stops in the district
};

struct CitySpec {
  std::string name;  // [A-Za-z0-9_] only
  LatLng center;
  int blocks = 10;        // streets every block_m, blocks x blocks square
  double block_m = 400.0;
  int num_routes = 4;     // each runs in both directions
  // Extra routes reusing the shape of route k (k < express_routes) but
  // serving every other stop, under their own public id.
  int express_routes = 0;
  double stop_spacing_m = 400.0;
  // Quadrant laws: SW, SE, NW, NE. A single entry applies to the whole city.
  std::vector<DistrictLaw> districts{DistrictLaw{}};
  double dwell_jitter_s = 0.0;  // per-stop offset, uniform in [-j, j]
};

struct WorldSpec {
  std::string feed_id = "synth";
  std::vector<CitySpec> cities;
  int64_t start_epoch_s = 1704067200;  // Monday 2024-01-01 00:00 UTC
  int num_days = 21;
  int first_departure_min = 6 * 60;
  int last_departure_min = 21 * 60;
  int headway_min = 60;
  int report_interval_s = 30;
  double position_noise_m = 5.0;
  int traffic_bucket_min = 15;
  double base_speed_lo_mps = 7.0;
  double base_speed_hi_mps = 14.0;
  // Speed multiplier per half-hour of the day.
  std::array<double, 48> diurnal = FlatDiurnal();
  double day_factor_sd = 0.0;       // log-normal city-wide factor per day
  double traversal_noise_sd = 0.0;  // log-normal factor per segment traversal
  double dwell_noise_sd = 0.0;      // log-normal factor per stop visit
  double traffic_noise_sd = 0.0;    // log-normal noise on the written speeds
  double local_effect_fraction = 0.0;  // share of level-15 cells with a local slowdown
  double local_effect_beta = 0.1;      // s/m added on segments ending in such cells
  // Adds misspecification * (10 / s)^2 / 100 s/m, outside the model family.
  double misspecification = 0.0;
  uint64_t seed = 1;

  static std::array<double, 48> FlatDiurnal();
  // Morning and evening peaks where speed drops by `depth`.
  static std::array<double, 48> RushHourDiurnal(double depth);

  // Error(kInvalidArgument) on inconsistent values.
  void Validate() const;
};

nlohmann::ordered_json WorldSpecToJson(const WorldSpec& spec);
WorldSpec WorldSpecFromJson(const nlohmann::json& j);

// Named presets: "tiny", "recovery", "sparse_local", "generalization".
WorldSpec PresetWorld(const std::string& name, uint64_t seed = 1);

struct SegmentLaw {
  double alpha = 1.0;
  double beta = 0.0;
  int district = 0;  // city index * 4 + quadrant
  bool local_effect = false;
};

// Per-trip noise factors; empty spans mean noise-free.
struct TripNoise {
  std::vector<double> segment_factor;  // per segment index
  std::vector<double> dwell_factor;    // per stop position on the route
};

class World {
 public:
  // Builds the world from its spec and a parsed GTFS directory.
  World(WorldSpec spec, Network network);

  const WorldSpec& spec() const { return spec_; }
  const Network& network() const { return network_; }

  int CityOfRoute(int route_index) const;
  int CityOfShape(const std::string& shape_id) const;
  const SegmentLaw& Law(const std::string& shape_id, int segment) const;
  double Dwell(const std::string& stop_id) const;
  // District (city * 4 + quadrant) of a point in the given city.
  int DistrictOf(int city, const LatLng& p) const;
  // True traffic speed, m/s.
  double Speed(const std::string& shape_id, int segment, double epoch_s) const;

  // Time at which a bus leaving start_m at start_ts reaches end_m, dwelling at
  // every stop with offset in [start_m, end_m). Optionally records the
  // (time, along) breakpoints of the piecewise-linear trajectory.
  double Simulate(int route_index, double start_m, double end_m, double start_ts,
                  const TripNoise* noise = nullptr,
                  std::vector<std::pair<double, double>>* path = nullptr) const;

  // Expected noise-free duration. Error(kNotFound) for an unknown route,
  // Error(kInvalidArgument) for an interval outside the shape.
  double OracleDuration(int route_index, double start_m, double end_m, double start_ts) const;

  // Traffic table with the true speeds at every bucket of the service window.
  TrafficTable TrueTraffic() const;

 private:
  WorldSpec spec_;
  Network network_;
  std::map<std::string, int> shape_city_;
  std::map<std::string, std::vector<SegmentLaw>> laws_;
  std::map<std::string, std::vector<double>> base_speed_;
  std::map<std::string, double> dwell_;
  std::vector<std::vector<double>> day_factor_;  // [city][day]
};

struct WorldPaths {
  std::filesystem::path root;
  std::filesystem::path gtfs;
  std::filesystem::path vehicle_positions;
  std::filesystem::path traffic;
  std::filesystem::path spec;

  static WorldPaths In(const std::filesystem::path& root);
};

// Writes world.json, gtfs/, vehicle_positions.jsonl and traffic.csv under
// `root` and returns the world built from the written feed.
World GenerateWorld(const WorldSpec& spec, const std::filesystem::path& root);
// Rebuilds the world from a directory written by GenerateWorld.
World LoadWorld(const std::filesystem::path& root);

}  // namespace bustr

#endif  // BUSTR_SYNTHWORLD_H_
