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

#include "bustr/ingest.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "bustr/error.h"

namespace bustr {
namespace {

constexpr double kTieEpsM = 1e-9;

// Header-indexed CSV file.
class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, std::string name)
      : name_(std::move(name)), in_(path) {
    if (!in_) throw Error(ErrorCode::kParse, "missing required file " + name_);
    std::string header;
    if (!std::getline(in_, header)) {
      throw Error(ErrorCode::kParse, name_ + ": empty file");
    }
    if (header.size() >= 3 && header.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      header.erase(0, 3);
    }
    StripCr(header);
    const auto cols = SplitCsvLine(header);
    for (size_t i = 0; i < cols.size(); ++i) columns_[cols[i]] = i;
    line_no_ = 1;
  }

  size_t Column(const std::string& col) const {
    auto it = columns_.find(col);
    if (it == columns_.end()) {
      throw Error(ErrorCode::kParse, name_ + ": missing column " + col);
    }
    return it->second;
  }

  bool Next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      StripCr(line);
      if (line.empty()) continue;
      fields = SplitCsvLine(line);
      return true;
    }
    return false;
  }

  const std::string& Get(const std::vector<std::string>& fields, size_t col) const {
    if (col >= fields.size()) Fail("too few fields");
    return fields[col];
  }

  double GetDouble(const std::vector<std::string>& fields, size_t col) const {
    const std::string& s = Get(fields, col);
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) {
      Fail("bad number '" + s + "'");
    }
    return v;
  }

  int64_t GetInt(const std::vector<std::string>& fields, size_t col) const {
    const std::string& s = Get(fields, col);
    int64_t v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
      Fail("bad integer '" + s + "'");
    }
    return v;
  }

  [[noreturn]] void Fail(const std::string& what) const {
    throw Error(ErrorCode::kParse, name_ + ":" + std::to_string(line_no_) + ": " + what);
  }

  int64_t line_no() const { return line_no_; }

 private:
  static void StripCr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }

  std::string name_;
  std::ifstream in_;
  std::unordered_map<std::string, size_t> columns_;
  int64_t line_no_ = 0;
};

double HeadingRad(const XY& a, const XY& b) { return std::atan2(b.y - a.y, b.x - a.x); }

double AbsHeadingChangeDeg(double h0, double h1) {
  double d = std::fabs(h1 - h0);
  if (d > std::numbers::pi) d = 2.0 * std::numbers::pi - d;
  return d * 180.0 / std::numbers::pi;
}

}  // namespace

int64_t Counters::Get(const std::string& name) const {
  auto it = counts_.find(name);
  return it == counts_.end() ? 0 : it->second;
}

void Counters::Merge(const Counters& other) {
  for (const auto& [k, v] : other.counts_) counts_[k] += v;
}

std::string RouteKey::Token() const {
  std::string t = feed_id + "|" + public_route_id + "|";
  for (size_t i = 0; i < stop_ids.size(); ++i) {
    if (i) t += ',';
    t += stop_ids[i];
  }
  return t;
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

// --- shapes -----------------------------------------------------------------

TripShape MakeShape(std::string shape_id, std::vector<LatLng> polyline) {
  if (polyline.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "shape " + shape_id + " needs at least 2 vertices");
  }
  TripShape s;
  s.shape_id = std::move(shape_id);
  s.polyline = std::move(polyline);
  s.frame = LocalFrame(s.polyline.front());
  s.xy.reserve(s.polyline.size());
  s.cumulative_m.reserve(s.polyline.size());
  for (const auto& p : s.polyline) {
    if (!p.IsValid()) {
      throw Error(ErrorCode::kInputDomain, "shape " + s.shape_id + " has invalid vertex");
    }
    s.xy.push_back(s.frame.ToXY(p));
    if (s.cumulative_m.empty()) {
      s.cumulative_m.push_back(0.0);
    } else {
      const XY& a = s.xy[s.xy.size() - 2];
      const XY& b = s.xy.back();
      s.cumulative_m.push_back(s.cumulative_m.back() + std::hypot(b.x - a.x, b.y - a.y));
    }
  }
  return s;
}

int TripShape::SegmentIndexAt(double along_m) const {
  return static_cast<int>(
      std::upper_bound(segment_breaks.begin(), segment_breaks.end(), along_m) -
      segment_breaks.begin());
}

double TripShape::SegmentStart(int index) const {
  return index == 0 ? 0.0 : segment_breaks[index - 1];
}

double TripShape::SegmentEnd(int index) const {
  return index == static_cast<int>(segment_breaks.size()) ? length_m()
                                                           : segment_breaks[index];
}

LatLng TripShape::PointAt(double along_m) const {
  if (along_m <= 0.0) return polyline.front();
  if (along_m >= length_m()) return polyline.back();
  const size_t e = static_cast<size_t>(
      std::upper_bound(cumulative_m.begin(), cumulative_m.end(), along_m) -
      cumulative_m.begin());
  const size_t a = e - 1;
  const double len = cumulative_m[e] - cumulative_m[a];
  const double t = len > 0 ? (along_m - cumulative_m[a]) / len : 0.0;
  return frame.ToLatLng({xy[a].x + t * (xy[e].x - xy[a].x), xy[a].y + t * (xy[e].y - xy[a].y)});
}

std::vector<double> DeriveSegments(const TripShape& shape, double turn_threshold_deg,
                                   double max_len_m) {
  if (shape.xy.size() < 2 || shape.length_m() <= 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "shape " + shape.shape_id + " has zero length");
  }
  if (!(max_len_m > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "max segment length must be positive");
  }
  // Distinct vertices only; repeated vertices carry no heading.
  std::vector<size_t> idx;
  for (size_t i = 0; i < shape.xy.size(); ++i) {
    if (idx.empty() || shape.cumulative_m[i] > shape.cumulative_m[idx.back()]) {
      idx.push_back(i);
    }
  }
  std::vector<double> turns;
  for (size_t k = 1; k + 1 < idx.size(); ++k) {
    const double h0 = HeadingRad(shape.xy[idx[k - 1]], shape.xy[idx[k]]);
    const double h1 = HeadingRad(shape.xy[idx[k]], shape.xy[idx[k + 1]]);
    if (AbsHeadingChangeDeg(h0, h1) > turn_threshold_deg) {
      turns.push_back(shape.cumulative_m[idx[k]]);
    }
  }
  std::vector<double> breaks;
  double piece_start = 0.0;
  turns.push_back(shape.length_m());
  for (double piece_end : turns) {
    for (double pos = piece_start + max_len_m; pos < piece_end - kTieEpsM; pos += max_len_m) {
      breaks.push_back(pos);
    }
    if (piece_end < shape.length_m()) breaks.push_back(piece_end);
    piece_start = piece_end;
  }
  return breaks;
}

Projection ProjectOntoShape(const TripShape& shape, const LatLng& p, double min_along_m) {
  const XY q = shape.frame.ToXY(p);
  Projection best{0.0, std::numeric_limits<double>::infinity()};
  for (size_t e = 0; e + 1 < shape.xy.size(); ++e) {
    const double a0 = shape.cumulative_m[e];
    const double a1 = shape.cumulative_m[e + 1];
    if (a1 < min_along_m) continue;
    const XY& A = shape.xy[e];
    const XY& B = shape.xy[e + 1];
    const double dx = B.x - A.x;
    const double dy = B.y - A.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((q.x - A.x) * dx + (q.y - A.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    double along = a0 + t * (a1 - a0);
    if (along < min_along_m) {
      along = min_along_m;
      t = a1 > a0 ? (along - a0) / (a1 - a0) : 0.0;
    }
    const double px = A.x + t * dx;
    const double py = A.y + t * dy;
    const double dist = std::hypot(q.x - px, q.y - py);
    if (dist < best.distance_m - kTieEpsM ||
        (std::fabs(dist - best.distance_m) <= kTieEpsM && along < best.along_m)) {
      best = {along, dist};
    }
  }
  return best;
}

// --- network ----------------------------------------------------------------

const TripShape& Network::ShapeFor(const Route& route) const {
  auto it = shapes.find(route.shape_id);
  if (it == shapes.end()) throw Error(ErrorCode::kNotFound, "shape " + route.shape_id);
  return it->second;
}

std::vector<int> Network::MatchRoutes(const std::string& route_ref) const {
  std::vector<int> out;
  for (size_t i = 0; i < routes.size(); ++i) {
    if (routes[i].key.Token() == route_ref || routes[i].key.public_route_id == route_ref) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

int Network::FindRoute(const std::string& route_ref) const {
  const std::vector<int> m = MatchRoutes(route_ref);
  if (m.empty()) throw Error(ErrorCode::kNotFound, "route " + route_ref);
  return m.front();
}

Network ParseGtfsStatic(const std::filesystem::path& dir, const GtfsOptions& options) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kParse, "GTFS directory not found: " + dir.string());
  }
  for (const char* f : {"stops.txt", "trips.txt", "stop_times.txt", "shapes.txt"}) {
    if (!std::filesystem::exists(dir / f)) {
      throw Error(ErrorCode::kParse, std::string("missing required file ") + f);
    }
  }
  Network net;
  net.feed_id = options.feed_id.empty() ? dir.filename().string() : options.feed_id;
  if (net.feed_id.empty()) net.feed_id = dir.parent_path().filename().string();

  if (std::filesystem::exists(dir / "agency.txt")) {
    CsvFile f(dir / "agency.txt", "agency.txt");
    std::vector<std::string> row;
    size_t tz_col = 0;
    bool has_tz = true;
    try {
      tz_col = f.Column("agency_timezone");
    } catch (const Error&) {
      has_tz = false;
    }
    if (has_tz && f.Next(row)) net.timezone = f.Get(row, tz_col);
  }

  {
    CsvFile f(dir / "stops.txt", "stops.txt");
    const size_t c_id = f.Column("stop_id");
    const size_t c_lat = f.Column("stop_lat");
    const size_t c_lon = f.Column("stop_lon");
    std::vector<std::string> row;
    while (f.Next(row)) {
      Stop s{f.Get(row, c_id), {f.GetDouble(row, c_lat), f.GetDouble(row, c_lon)}};
      if (s.stop_id.empty()) f.Fail("empty stop_id");
      if (!s.location.IsValid()) f.Fail("invalid stop location");
      if (!net.stops.emplace(s.stop_id, s).second) f.Fail("duplicate stop_id " + s.stop_id);
    }
  }

  std::map<std::string, std::vector<std::pair<int64_t, LatLng>>> shape_pts;
  {
    CsvFile f(dir / "shapes.txt", "shapes.txt");
    const size_t c_id = f.Column("shape_id");
    const size_t c_lat = f.Column("shape_pt_lat");
    const size_t c_lon = f.Column("shape_pt_lon");
    const size_t c_seq = f.Column("shape_pt_sequence");
    std::vector<std::string> row;
    while (f.Next(row)) {
      LatLng p{f.GetDouble(row, c_lat), f.GetDouble(row, c_lon)};
      if (!p.IsValid()) f.Fail("invalid shape point");
      shape_pts[f.Get(row, c_id)].emplace_back(f.GetInt(row, c_seq), p);
    }
  }
  for (auto& [id, pts] : shape_pts) {
    std::sort(pts.begin(), pts.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<LatLng> poly;
    poly.reserve(pts.size());
    for (const auto& [seq, p] : pts) poly.push_back(p);
    TripShape shape = MakeShape(id, std::move(poly));
    shape.segment_breaks =
        DeriveSegments(shape, options.turn_threshold_deg, options.max_segment_m);
    net.shapes.emplace(id, std::move(shape));
  }

  struct TripInfo {
    std::string route_id;
    std::string shape_id;
  };
  std::map<std::string, TripInfo> trips;
  {
    CsvFile f(dir / "trips.txt", "trips.txt");
    const size_t c_route = f.Column("route_id");
    const size_t c_trip = f.Column("trip_id");
    const size_t c_shape = f.Column("shape_id");
    std::vector<std::string> row;
    while (f.Next(row)) {
      TripInfo t{f.Get(row, c_route), f.Get(row, c_shape)};
      if (!net.shapes.count(t.shape_id)) f.Fail("unknown shape_id " + t.shape_id);
      if (!trips.emplace(f.Get(row, c_trip), t).second) {
        f.Fail("duplicate trip_id " + f.Get(row, c_trip));
      }
    }
  }

  std::map<std::string, std::vector<std::pair<int64_t, std::string>>> trip_stops;
  {
    CsvFile f(dir / "stop_times.txt", "stop_times.txt");
    const size_t c_trip = f.Column("trip_id");
    const size_t c_stop = f.Column("stop_id");
    const size_t c_seq = f.Column("stop_sequence");
    std::vector<std::string> row;
    while (f.Next(row)) {
      const std::string& trip = f.Get(row, c_trip);
      const std::string& stop = f.Get(row, c_stop);
      if (!trips.count(trip)) f.Fail("unknown trip_id " + trip);
      if (!net.stops.count(stop)) f.Fail("unknown stop_id " + stop);
      trip_stops[trip].emplace_back(f.GetInt(row, c_seq), stop);
    }
  }

  // Trips iterate in trip_id order, so the shape chosen for a route is the
  // one of its lexicographically first trip.
  std::map<RouteKey, Route> routes;
  for (auto& [trip_id, info] : trips) {
    auto it = trip_stops.find(trip_id);
    if (it == trip_stops.end() || it->second.size() < 2) continue;
    auto& seq = it->second;
    std::sort(seq.begin(), seq.end());
    RouteKey key{net.feed_id, info.route_id, {}};
    for (const auto& [n, stop] : seq) key.stop_ids.push_back(stop);
    auto [rit, inserted] = routes.try_emplace(key);
    if (inserted) {
      rit->second.key = key;
      rit->second.shape_id = info.shape_id;
    }
    rit->second.trip_ids.push_back(trip_id);
  }
  for (auto& [key, route] : routes) {
    const TripShape& shape = net.shapes.at(route.shape_id);
    double prev = 0.0;
    for (const auto& stop_id : key.stop_ids) {
      prev = ProjectOntoShape(shape, net.stops.at(stop_id).location, prev).along_m;
      route.stop_offsets.push_back(prev);
    }
    const int index = static_cast<int>(net.routes.size());
    for (const auto& t : route.trip_ids) net.trip_to_route[t] = index;
    net.routes.push_back(std::move(route));
  }
  return net;
}

// --- vehicle positions --------------------------------------------------------

std::string Trace::Id() const {
  return feed_id + "/" + vehicle_id + "/" + trip_id + "/" + std::to_string(trip_start);
}

Projection SnapReport(const VehiclePositionReport& report, const TripShape& shape) {
  return ProjectOntoShape(shape, report.position);
}

void SnapTrace(Trace& trace, const TripShape& shape, double tolerance_m,
               Counters& counters) {
  std::vector<VehiclePositionReport> kept;
  kept.reserve(trace.reports.size());
  for (auto& r : trace.reports) {
    const Projection p = SnapReport(r, shape);
    if (p.distance_m > tolerance_m) {
      counters.Add("dropped_off_shape");
      continue;
    }
    r.along_m = p.along_m;
    kept.push_back(r);
  }
  trace.reports = std::move(kept);
}

ParsedTraces ParseVehiclePositions(std::istream& in, const Network& network,
                                   const TraceOptions& options) {
  ParsedTraces out;
  using Key = std::tuple<std::string, std::string, std::string>;  // feed, vehicle, trip
  std::map<Key, std::vector<VehiclePositionReport>> groups;
  std::string line;
  while (std::getline(in, line)) {
    out.counters.Add("lines_total");
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      out.counters.Add("lines_blank");
      continue;
    }
    std::string vehicle, feed, trip;
    VehiclePositionReport r;
    try {
      const auto j = nlohmann::json::parse(line);
      vehicle = j.at("vehicle_id").get<std::string>();
      feed = j.at("feed_id").get<std::string>();
      trip = j.at("trip_id").get<std::string>();
      r.timestamp = j.at("ts").get<int64_t>();
      r.position = {j.at("lat").get<double>(), j.at("lng").get<double>()};
    } catch (const nlohmann::json::exception&) {
      out.counters.Add("rejected_malformed");
      continue;
    }
    if (feed != network.feed_id || !network.trip_to_route.count(trip)) {
      out.counters.Add("rejected_unknown_trip");
      continue;
    }
    if (!r.position.IsValid()) {
      out.counters.Add("rejected_invalid_position");
      continue;
    }
    groups[{feed, vehicle, trip}].push_back(r);
  }

  for (auto& [key, reports] : groups) {
    std::sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
      return std::tie(a.timestamp, a.position.lat, a.position.lng) <
             std::tie(b.timestamp, b.position.lat, b.position.lng);
    });
    const auto& [feed, vehicle, trip] = key;
    const int route_index = network.trip_to_route.at(trip);
    size_t begin = 0;
    while (begin < reports.size()) {
      size_t end = begin + 1;
      while (end < reports.size() &&
             reports[end].timestamp - reports[end - 1].timestamp <= options.split_gap_s) {
        ++end;
      }
      bool monotone = true;
      for (size_t i = begin + 1; i < end; ++i) {
        if (reports[i].timestamp <= reports[i - 1].timestamp) monotone = false;
      }
      if (!monotone) {
        out.counters.Add("dropped_nonmonotone_trip_reports", static_cast<int64_t>(end - begin));
        out.counters.Add("dropped_nonmonotone_trips");
      } else {
        Trace t;
        t.feed_id = feed;
        t.vehicle_id = vehicle;
        t.trip_id = trip;
        t.route_index = route_index;
        t.trip_start = reports[begin].timestamp;
        t.reports.assign(reports.begin() + static_cast<std::ptrdiff_t>(begin),
                         reports.begin() + static_cast<std::ptrdiff_t>(end));
        SnapTrace(t, network.ShapeFor(network.routes[route_index]),
                  options.snap_tolerance_m, out.counters);
        out.counters.Add("accepted_reports", static_cast<int64_t>(t.reports.size()));
        if (!t.reports.empty()) out.traces.push_back(std::move(t));
      }
      begin = end;
    }
  }
  return out;
}

ParsedTraces ParseVehiclePositions(const std::filesystem::path& path,
                                   const Network& network, const TraceOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return ParseVehiclePositions(in, network, options);
}

// --- traffic ------------------------------------------------------------------

TrafficTable::TrafficTable(int bucket_minutes, double default_speed_mps)
    : bucket_minutes_(bucket_minutes), default_speed_mps_(default_speed_mps) {
  if (bucket_minutes <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "traffic bucket width must be positive");
  }
}

int64_t TrafficTable::BucketOf(double epoch_s) const {
  const int64_t minute = static_cast<int64_t>(std::floor(epoch_s / 60.0));
  const int64_t g = bucket_minutes_;
  return (minute >= 0 ? minute / g : (minute - g + 1) / g) * g;
}

void TrafficTable::Add(const SegmentKey& key, int64_t bucket_epoch_min, double speed_mps) {
  if (!(speed_mps > 0.0) || speed_mps > kMaxSpeedMps || !std::isfinite(speed_mps)) {
    throw Error(ErrorCode::kInvalidArgument,
                "traffic speed out of (0, 70] m/s: " + std::to_string(speed_mps));
  }
  if (key.segment_index < 0) {
    throw Error(ErrorCode::kInvalidArgument, "negative segment index");
  }
  if (bucket_epoch_min % bucket_minutes_ != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "bucket " + std::to_string(bucket_epoch_min) + " not aligned to " +
                    std::to_string(bucket_minutes_) + " min");
  }
  finalized_ = false;
  auto& segs = by_shape_[key.shape_id];
  if (static_cast<int>(segs.size()) <= key.segment_index) segs.resize(key.segment_index + 1);
  Series& s = segs[key.segment_index];
  auto [it, inserted] = s.speeds.emplace(bucket_epoch_min, speed_mps);
  if (inserted) {
    ++rows_;
  } else {
    ++duplicates_;
    it->second = std::min(it->second, speed_mps);
  }
}

const TrafficTable::Series* TrafficTable::Find(const SegmentKey& key) const {
  auto it = by_shape_.find(key.shape_id);
  if (it == by_shape_.end() || key.segment_index < 0 ||
      key.segment_index >= static_cast<int>(it->second.size())) {
    return nullptr;
  }
  const Series& s = it->second[key.segment_index];
  return s.speeds.empty() ? nullptr : &s;
}

void TrafficTable::Finalize() {
  global_mean_cache_ = ComputeGlobalMean();
  finalized_ = true;
}

double TrafficTable::global_mean() const {
  return finalized_ ? global_mean_cache_ : ComputeGlobalMean();
}

double TrafficTable::ComputeGlobalMean() const {
  if (rows_ == 0) return default_speed_mps_;
  // Summed in key order so the result does not depend on insertion order.
  double sum = 0.0;
  for (const auto& [shape, segs] : by_shape_) {
    for (const auto& s : segs) {
      for (const auto& [b, v] : s.speeds) sum += v;
    }
  }
  return sum / static_cast<double>(rows_);
}

SpeedLookup TrafficTable::Lookup(const SegmentKey& key, double epoch_s) const {
  const Series* s = Find(key);
  if (s == nullptr) return {global_mean(), TrafficSource::kGlobalMean};
  const int64_t bucket = BucketOf(epoch_s);
  auto hi = s->speeds.lower_bound(bucket);
  if (hi != s->speeds.end() && hi->first == bucket) return {hi->second, TrafficSource::kExact};
  const std::map<int64_t, double>::const_iterator none = s->speeds.end();
  auto lo = hi == s->speeds.begin() ? none : std::prev(hi);
  auto best = none;
  if (lo != none) best = lo;
  if (hi != none && (best == none || hi->first - bucket < bucket - best->first)) best = hi;
  if (best != none && std::llabs(best->first - bucket) <= 120) {
    return {best->second, TrafficSource::kNearest};
  }
  double sum = 0.0;
  for (const auto& [b, v] : s->speeds) sum += v;
  return {sum / static_cast<double>(s->speeds.size()), TrafficSource::kSegmentMean};
}

void TrafficTable::WriteCsv(std::ostream& out) const {
  out << "shape_id,segment_index,bucket_epoch_min,speed_mps\n";
  char buf[64];
  for (const auto& [shape, segs] : by_shape_) {
    for (size_t i = 0; i < segs.size(); ++i) {
      for (const auto& [b, v] : segs[i].speeds) {
        auto r = std::to_chars(buf, buf + sizeof(buf), v);
        out << shape << ',' << i << ',' << b << ',' << std::string_view(buf, r.ptr - buf)
            << '\n';
      }
    }
  }
}

ParsedTraffic ParseTraffic(std::istream& in, int bucket_minutes) {
  ParsedTraffic out{TrafficTable(bucket_minutes), {}};
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParse, "traffic.csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = SplitCsvLine(line);
  std::map<std::string, size_t> cols;
  for (size_t i = 0; i < header.size(); ++i) cols[header[i]] = i;
  for (const char* c : {"shape_id", "segment_index", "bucket_epoch_min", "speed_mps"}) {
    if (!cols.count(c)) throw Error(ErrorCode::kParse, std::string("traffic.csv: missing column ") + c);
  }
  const size_t c_shape = cols["shape_id"], c_seg = cols["segment_index"],
               c_bucket = cols["bucket_epoch_min"], c_speed = cols["speed_mps"];
  const size_t need = std::max({c_shape, c_seg, c_bucket, c_speed});
  int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.counters.Add("rows_total");
    const auto f = SplitCsvLine(line);
    int64_t seg = 0, bucket = 0;
    double speed = 0.0;
    const auto num = [](const std::string& s, auto& v) {
      auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      return r.ec == std::errc() && r.ptr == s.data() + s.size();
    };
    if (f.size() <= need || !num(f[c_seg], seg) || !num(f[c_bucket], bucket) ||
        !num(f[c_speed], speed)) {
      throw Error(ErrorCode::kParse, "traffic.csv:" + std::to_string(line_no) + ": malformed row");
    }
    if (!(speed > 0.0) || speed > kMaxSpeedMps || !std::isfinite(speed)) {
      out.counters.Add("rejected_speed");
      continue;
    }
    if (bucket % bucket_minutes != 0 || seg < 0) {
      out.counters.Add("rejected_bucket");
      continue;
    }
    out.table.Add({f[c_shape], static_cast<int>(seg)}, bucket, speed);
    out.counters.Add("accepted_rows");
  }
  out.counters.Add("duplicate_buckets", out.table.duplicates());
  out.table.Finalize();
  return out;
}

ParsedTraffic ParseTraffic(const std::filesystem::path& path, int bucket_minutes) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return ParseTraffic(in, bucket_minutes);
}

}  // namespace bustr
