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

// Transit network, vehicle trace and traffic table model, plus the parsers
// that build them from files:
//
//   GTFS static:             stops.txt, trips.txt, stop_times.txt, shapes.txt
//                            (agency.txt optional, for agency_timezone)
//   vehicle_positions.jsonl  {"vehicle_id","feed_id","trip_id","ts","lat","lng"}
//   traffic.csv              shape_id,segment_index,bucket_epoch_min,speed_mps

#ifndef BUSTR_INGEST_H_
#define BUSTR_INGEST_H_

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bustr/geo.h"

namespace bustr {

// Named event counters. Every dropped row, report or trip lands in one.
class Counters {
 public:
  void Add(const std::string& name, int64_t n = 1) { counts_[name] += n; }
  int64_t Get(const std::string& name) const;
  const std::map<std::string, int64_t>& all() const { return counts_; }
  void Merge(const Counters& other);

 private:
  std::map<std::string, int64_t> counts_;
};

struct Stop {
  std::string stop_id;
  LatLng location;
};

// A route is the exact ordered stop sequence plus the public route identity;
// the same public id with a different stop order is a different route.
struct RouteKey {
  std::string feed_id;
  std::string public_route_id;
  std::vector<std::string> stop_ids;

  // Stable vocabulary token: "<feed>|<route>|<stop>,<stop>,...".
  std::string Token() const;

  friend auto operator<=>(const RouteKey&, const RouteKey&) = default;
  friend bool operator==(const RouteKey&, const RouteKey&) = default;
};

struct TripShape {
  std::string shape_id;
  std::vector<LatLng> polyline;
  LocalFrame frame;
  std::vector<XY> xy;
  std::vector<double> cumulative_m;
  // Interior along-shape offsets delimiting road segments; segment i spans
  // [break[i-1] or 0, break[i] or length).
  std::vector<double> segment_breaks;

  double length_m() const { return cumulative_m.empty() ? 0.0 : cumulative_m.back(); }
  int num_segments() const { return static_cast<int>(segment_breaks.size()) + 1; }
  // Index of the segment containing `along_m`; offsets on a break belong to
  // the segment that starts there.
  int SegmentIndexAt(double along_m) const;
  double SegmentStart(int index) const;
  double SegmentEnd(int index) const;
  LatLng PointAt(double along_m) const;
};

// Builds frame, planar vertices and cumulative lengths. Needs >= 2 vertices.
TripShape MakeShape(std::string shape_id, std::vector<LatLng> polyline);

// Breaks at every vertex whose heading change exceeds `turn_threshold_deg`,
// plus extra breaks so no segment is longer than `max_len_m`.
std::vector<double> DeriveSegments(const TripShape& shape,
                                   double turn_threshold_deg = 30.0,
                                   double max_len_m = 100.0);

struct Projection {
  double along_m = 0.0;
  double distance_m = 0.0;
};

// Closest point on the polyline with along >= min_along_m; ties go to the
// smaller along offset.
Projection ProjectOntoShape(const TripShape& shape, const LatLng& p,
                            double min_along_m = 0.0);

struct Route {
  RouteKey key;
  std::string shape_id;
  std::vector<double> stop_offsets;  // along-shape offset per stop, route order
  std::vector<std::string> trip_ids;
};

struct Network {
  std::string feed_id;
  std::string timezone = "UTC";
  std::map<std::string, Stop> stops;
  std::vector<Route> routes;  // sorted by key
  std::map<std::string, TripShape> shapes;
  std::map<std::string, int> trip_to_route;

  const TripShape& ShapeFor(const Route& route) const;
  // Routes whose full token or public route id equals `route_ref`, in route
  // order.
  std::vector<int> MatchRoutes(const std::string& route_ref) const;
  // First of MatchRoutes. Not-found error when there is none.
  int FindRoute(const std::string& route_ref) const;
};

struct GtfsOptions {
  std::string feed_id;  // defaults to the directory name
  double turn_threshold_deg = 30.0;
  double max_segment_m = 100.0;
};

// Throws Error(kParse) naming the file for a missing required file, and with
// "<file>:<line>" for malformed rows. Unknown columns are ignored.
Network ParseGtfsStatic(const std::filesystem::path& dir,
                        const GtfsOptions& options = {});

struct VehiclePositionReport {
  int64_t timestamp = 0;  // epoch seconds
  LatLng position;
  std::optional<double> along_m;
};

// One vehicle running one trip: time-sorted, strictly increasing timestamps.
struct Trace {
  std::string feed_id;
  std::string vehicle_id;
  std::string trip_id;
  int route_index = -1;
  int64_t trip_start = 0;
  std::vector<VehiclePositionReport> reports;

  std::string Id() const;
};

struct TraceOptions {
  double snap_tolerance_m = 100.0;
  // Reports of one (vehicle, trip) further apart than this start a new trace
  // (the same trip id recurs on every service day).
  int64_t split_gap_s = 3 * 3600;
};

// Snaps each report onto the shape; reports further than the tolerance are
// removed and counted as "dropped_off_shape".
Projection SnapReport(const VehiclePositionReport& report, const TripShape& shape);
void SnapTrace(Trace& trace, const TripShape& shape, double tolerance_m,
               Counters& counters);

struct ParsedTraces {
  std::vector<Trace> traces;  // sorted by (feed, vehicle, trip, start)
  Counters counters;
};

// Every input line lands in exactly one of: lines_blank, rejected_malformed,
// rejected_unknown_trip, rejected_invalid_position,
// dropped_nonmonotone_trip_reports, dropped_off_shape, accepted_reports.
ParsedTraces ParseVehiclePositions(std::istream& in, const Network& network,
                                   const TraceOptions& options = {});
ParsedTraces ParseVehiclePositions(const std::filesystem::path& path,
                                   const Network& network,
                                   const TraceOptions& options = {});

struct SegmentKey {
  std::string shape_id;
  int segment_index = 0;
  friend auto operator<=>(const SegmentKey&, const SegmentKey&) = default;
  friend bool operator==(const SegmentKey&, const SegmentKey&) = default;
};

enum class TrafficSource : uint8_t {
  kExact = 0,
  kNearest = 1,
  kSegmentMean = 2,
  kGlobalMean = 3,
};

struct SpeedLookup {
  double speed_mps = 0.0;
  TrafficSource source = TrafficSource::kExact;
};

inline constexpr double kMaxSpeedMps = 70.0;

// Per-segment speed series keyed by epoch-minute buckets of width G.
class TrafficTable {
 public:
  explicit TrafficTable(int bucket_minutes = 5, double default_speed_mps = 8.0);

  // Speed must be in (0, 70] m/s, bucket aligned to G; otherwise
  // Error(kInvalidArgument). Duplicate buckets keep the lower speed.
  void Add(const SegmentKey& key, int64_t bucket_epoch_min, double speed_mps);

  // exact bucket -> nearest bucket within 2 h -> segment mean -> global mean.
  SpeedLookup Lookup(const SegmentKey& key, double epoch_s) const;

  int bucket_minutes() const { return bucket_minutes_; }
  int64_t BucketOf(double epoch_s) const;
  size_t size() const { return rows_; }
  double global_mean() const;
  // Caches the global mean; Add() invalidates the cache.
  void Finalize();
  int64_t duplicates() const { return duplicates_; }

  void WriteCsv(std::ostream& out) const;

 private:
  struct Series {
    std::map<int64_t, double> speeds;
  };
  int bucket_minutes_;
  double default_speed_mps_;
  std::map<std::string, std::vector<Series>> by_shape_;
  size_t rows_ = 0;
  double sum_ = 0.0;
  int64_t duplicates_ = 0;
  bool finalized_ = false;
  double global_mean_cache_ = 0.0;

  double ComputeGlobalMean() const;
  const Series* Find(const SegmentKey& key) const;
};

struct ParsedTraffic {
  TrafficTable table;
  Counters counters;
};

// Rows with speed <= 0 (or above the cap) are rejected and counted.
ParsedTraffic ParseTraffic(std::istream& in, int bucket_minutes = 5);
ParsedTraffic ParseTraffic(const std::filesystem::path& path,
                           int bucket_minutes = 5);

// RFC 4180 field splitting for a single line (no embedded newlines).
std::vector<std::string> SplitCsvLine(const std::string& line);

}  // namespace bustr

#endif  // BUSTR_INGEST_H_
