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

#include "bustr/synthworld.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "bustr/error.h"
#include "bustr/rng.h"
#include "bustr/shingler.h"
#include "bustr/spatial_grid.h"

namespace bustr {
namespace {

constexpr double kMinSpeedMps = 0.5;
constexpr double kNominalSpeedMps = 8.0;
constexpr int kTrafficLeadMin = 60;
constexpr int kTrafficTailMin = 240;

double HashUniform(uint64_t seed, const std::string& label) {
  Rng rng(DeriveSeed(seed, label));
  return rng.Uniform();
}

double HashNormal(uint64_t seed, const std::string& label) {
  Rng rng(DeriveSeed(seed, label));
  return rng.Normal();
}

std::string Num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

void Invalid(const std::string& what) { throw Error(ErrorCode::kInvalidArgument, what); }

std::string CityPrefix(const std::string& id) { return id.substr(0, id.find('-')); }

std::ofstream OpenOut(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + p.string());
  return out;
}

std::string Hhmm(int minute) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%02d%02d", (minute / 60) % 100, minute % 60);
  return buf;
}

std::string Clock(double seconds_of_day) {
  const int s = static_cast<int>(std::lround(seconds_of_day));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d:%02d:%02d", s / 3600, (s / 60) % 60, s % 60);
  return buf;
}

struct PlannedRoute {
  std::string public_id;
  std::string shape_f;
  std::string shape_b;
  std::vector<std::string> stops;  // forward order
};

struct PlannedCity {
  std::map<std::string, std::vector<LatLng>> shapes;
  std::map<std::string, LatLng> stops;
  std::vector<PlannedRoute> routes;
};

PlannedCity PlanCity(const CitySpec& city, uint64_t seed) {
  PlannedCity out;
  Rng rng(DeriveSeed(seed, "city:" + city.name));
  const LocalFrame frame(city.center);
  const int n = city.blocks;
  const double half = n * city.block_m / 2.0;
  std::vector<PlannedRoute> base;
  for (int k = 0; k < city.num_routes; ++k) {
    const int a = static_cast<int>(rng.Below(n + 1));
    const int m = static_cast<int>(rng.Below(n + 1));
    const int b = static_cast<int>(rng.Below(n + 1));
    const int x1 = 1 + static_cast<int>(rng.Below(n / 2));
    const int x2 = x1 + 1 + static_cast<int>(rng.Below(n - x1 - 1));
    std::vector<std::pair<int, int>> grid = {{0, a}, {x1, a}, {x1, m}, {x2, m}, {x2, b}, {n, b}};
    if (k % 2 == 1) {
      for (auto& [gx, gy] : grid) std::swap(gx, gy);
    }
    std::vector<LatLng> poly;
    std::pair<int, int> prev{-1, -1};
    for (const auto& g : grid) {
      if (g == prev) continue;
      prev = g;
      poly.push_back(frame.ToLatLng({g.first * city.block_m - half, g.second * city.block_m - half}));
    }
    PlannedRoute r;
    r.public_id = city.name + "-R" + std::to_string(k);
    r.shape_f = r.public_id + "-f";
    r.shape_b = r.public_id + "-b";
    const TripShape shape = MakeShape(r.shape_f, poly);
    const int nstops = std::max(1, static_cast<int>(std::lround(shape.length_m() / city.stop_spacing_m)));
    for (int i = 0; i <= nstops; ++i) {
      const std::string id = r.public_id + "-S" + std::to_string(i);
      out.stops[id] = shape.PointAt(shape.length_m() * i / nstops);
      r.stops.push_back(id);
    }
    std::vector<LatLng> rev(poly.rbegin(), poly.rend());
    out.shapes[r.shape_f] = std::move(poly);
    out.shapes[r.shape_b] = std::move(rev);
    base.push_back(r);
  }
  out.routes = base;
  for (int k = 0; k < city.express_routes; ++k) {
    PlannedRoute x = base[k];
    x.public_id = city.name + "-X" + std::to_string(k);
    std::vector<std::string> kept;
    for (size_t i = 0; i < x.stops.size(); i += 2) kept.push_back(x.stops[i]);
    if (kept.back() != x.stops.back()) kept.push_back(x.stops.back());
    x.stops = std::move(kept);
    out.routes.push_back(std::move(x));
  }
  return out;
}

void WriteGtfs(const WorldSpec& spec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto agency = OpenOut(dir / "agency.txt");
  agency << "agency_id,agency_name,agency_timezone\n" << spec.feed_id << ",Synthetic Transit,UTC\n";
  auto routes = OpenOut(dir / "routes.txt");
  routes << "route_id,route_short_name,route_type\n";
  auto stops = OpenOut(dir / "stops.txt");
  stops << "stop_id,stop_name,stop_lat,stop_lon\n";
  auto shapes = OpenOut(dir / "shapes.txt");
  shapes << "shape_id,shape_pt_lat,shape_pt_lon,shape_pt_sequence\n";
  auto trips = OpenOut(dir / "trips.txt");
  trips << "route_id,service_id,trip_id,shape_id\n";
  auto stop_times = OpenOut(dir / "stop_times.txt");
  stop_times << "trip_id,arrival_time,departure_time,stop_id,stop_sequence\n";

  for (const CitySpec& city : spec.cities) {
    const PlannedCity plan = PlanCity(city, spec.seed);
    std::map<std::string, TripShape> built;
    for (const auto& [id, poly] : plan.shapes) {
      for (size_t i = 0; i < poly.size(); ++i) {
        shapes << id << ',' << Num(poly[i].lat) << ',' << Num(poly[i].lng) << ',' << i << '\n';
      }
      built.emplace(id, MakeShape(id, poly));
    }
    for (const auto& [id, p] : plan.stops) {
      stops << id << ',' << id << ',' << Num(p.lat) << ',' << Num(p.lng) << '\n';
    }
    for (const PlannedRoute& r : plan.routes) {
      routes << r.public_id << ',' << r.public_id << ",3\n";
      for (const char dir_tag : {'f', 'b'}) {
        const std::string& shape_id = dir_tag == 'f' ? r.shape_f : r.shape_b;
        const TripShape& shape = built.at(shape_id);
        std::vector<std::string> seq = r.stops;
        if (dir_tag == 'b') std::reverse(seq.begin(), seq.end());
        for (int dep = spec.first_departure_min; dep <= spec.last_departure_min;
             dep += spec.headway_min) {
          const std::string trip = r.public_id + "-" + dir_tag + "-" + Hhmm(dep);
          trips << r.public_id << ",daily," << trip << ',' << shape_id << '\n';
          for (size_t i = 0; i < seq.size(); ++i) {
            const double along = ProjectOntoShape(shape, plan.stops.at(seq[i])).along_m;
            const std::string t = Clock(dep * 60.0 + along / kNominalSpeedMps);
            stop_times << trip << ',' << t << ',' << t << ',' << seq[i] << ',' << i << '\n';
          }
        }
      }
    }
  }
}

int DepartureMinute(const std::string& trip_id) {
  const std::string tail = trip_id.substr(trip_id.size() - 4);
  return std::stoi(tail.substr(0, 2)) * 60 + std::stoi(tail.substr(2));
}

}  // namespace

// --- spec -------------------------------------------------------------------------

std::array<double, 48> WorldSpec::FlatDiurnal() {
  std::array<double, 48> d;
  d.fill(1.0);
  return d;
}

std::array<double, 48> WorldSpec::RushHourDiurnal(double depth) {
  std::array<double, 48> d;
  for (int s = 0; s < 48; ++s) {
    const double h = (s + 0.5) / 2.0;
    const double am = std::exp(-0.5 * std::pow((h - 8.0) / 1.0, 2));
    const double pm = std::exp(-0.5 * std::pow((h - 17.5) / 1.25, 2));
    d[s] = 1.0 - depth * std::max(am, pm);
  }
  return d;
}

void WorldSpec::Validate() const {
  if (feed_id.empty()) Invalid("feed_id must be nonempty");
  if (cities.empty()) Invalid("world needs at least one city");
  std::vector<std::string> names;
  for (const CitySpec& c : cities) {
    if (c.name.empty() ||
        !std::all_of(c.name.begin(), c.name.end(), [](char ch) { return std::isalnum(ch) || ch == '_'; })) {
      Invalid("city name must be [A-Za-z0-9_]+: '" + c.name + "'");
    }
    names.push_back(c.name);
    if (!c.center.IsValid()) Invalid("city " + c.name + " centre invalid");
    if (c.blocks < 3 || !(c.block_m > 0.0)) Invalid("city " + c.name + " needs blocks >= 3, block_m > 0");
    if (c.num_routes < 1 || c.express_routes < 0 || c.express_routes > c.num_routes) {
      Invalid("city " + c.name + " route counts");
    }
    if (!(c.stop_spacing_m > 0.0)) Invalid("stop spacing must be positive");
    if (c.districts.size() != 1 && c.districts.size() != 4) Invalid("districts must have 1 or 4 laws");
    for (const DistrictLaw& l : c.districts) {
      if (!(l.alpha > 0.0) || !(l.beta >= 0.0) || !(l.dwell_s >= 0.0)) {
        Invalid("district law needs alpha > 0, beta >= 0, dwell >= 0");
      }
    }
    if (!(c.dwell_jitter_s >= 0.0)) Invalid("dwell jitter must be >= 0");
  }
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end()) Invalid("duplicate city name");
  if (start_epoch_s % 86400 != 0) Invalid("start_epoch_s must be a UTC midnight");
  if (num_days < 1) Invalid("num_days must be >= 1");
  if (first_departure_min < 0 || last_departure_min >= 1440 ||
      first_departure_min > last_departure_min || headway_min <= 0) {
    Invalid("departure window invalid");
  }
  if (report_interval_s <= 0 || !(position_noise_m >= 0.0)) Invalid("report settings invalid");
  if (traffic_bucket_min <= 0 || 30 % traffic_bucket_min != 0) {
    Invalid("traffic bucket must divide 30 minutes");
  }
  if (!(base_speed_lo_mps > 0.0) || !(base_speed_hi_mps >= base_speed_lo_mps) ||
      base_speed_hi_mps > kMaxSpeedMps) {
    Invalid("base speed range invalid");
  }
  for (double d : diurnal) {
    if (!(d > 0.0) || !std::isfinite(d)) Invalid("diurnal multipliers must be positive");
  }
  for (double sd : {day_factor_sd, traversal_noise_sd, dwell_noise_sd, traffic_noise_sd}) {
    if (!(sd >= 0.0)) Invalid("noise levels must be >= 0");
  }
  if (!(local_effect_fraction >= 0.0 && local_effect_fraction <= 1.0) ||
      !(local_effect_beta >= 0.0)) {
    Invalid("local effect settings invalid");
  }
  if (!(misspecification >= 0.0)) Invalid("misspecification must be >= 0");
}

nlohmann::ordered_json WorldSpecToJson(const WorldSpec& s) {
  nlohmann::ordered_json j;
  j["feed_id"] = s.feed_id;
  auto& cities = j["cities"];
  cities = nlohmann::ordered_json::array();
  for (const CitySpec& c : s.cities) {
    nlohmann::ordered_json cj;
    cj["name"] = c.name;
    cj["center"] = {c.center.lat, c.center.lng};
    cj["blocks"] = c.blocks;
    cj["block_m"] = c.block_m;
    cj["num_routes"] = c.num_routes;
    cj["express_routes"] = c.express_routes;
    cj["stop_spacing_m"] = c.stop_spacing_m;
    cj["districts"] = nlohmann::ordered_json::array();
    for (const DistrictLaw& l : c.districts) {
      cj["districts"].push_back({{"alpha", l.alpha}, {"beta", l.beta}, {"dwell_s", l.dwell_s}});
    }
    cj["dwell_jitter_s"] = c.dwell_jitter_s;
    cities.push_back(cj);
  }
  j["start_epoch_s"] = s.start_epoch_s;
  j["num_days"] = s.num_days;
  j["first_departure_min"] = s.first_departure_min;
  j["last_departure_min"] = s.last_departure_min;
  j["headway_min"] = s.headway_min;
  j["report_interval_s"] = s.report_interval_s;
  j["position_noise_m"] = s.position_noise_m;
  j["traffic_bucket_min"] = s.traffic_bucket_min;
  j["base_speed_lo_mps"] = s.base_speed_lo_mps;
  j["base_speed_hi_mps"] = s.base_speed_hi_mps;
  j["diurnal"] = s.diurnal;
  j["day_factor_sd"] = s.day_factor_sd;
  j["traversal_noise_sd"] = s.traversal_noise_sd;
  j["dwell_noise_sd"] = s.dwell_noise_sd;
  j["traffic_noise_sd"] = s.traffic_noise_sd;
  j["local_effect_fraction"] = s.local_effect_fraction;
  j["local_effect_beta"] = s.local_effect_beta;
  j["misspecification"] = s.misspecification;
  j["seed"] = s.seed;
  return j;
}

WorldSpec WorldSpecFromJson(const nlohmann::json& j) {
  WorldSpec s;
  try {
    s.feed_id = j.at("feed_id").get<std::string>();
    for (const auto& cj : j.at("cities")) {
      CitySpec c;
      c.name = cj.at("name").get<std::string>();
      const auto center = cj.at("center").get<std::array<double, 2>>();
      c.center = {center[0], center[1]};
      c.blocks = cj.at("blocks").get<int>();
      c.block_m = cj.at("block_m").get<double>();
      c.num_routes = cj.at("num_routes").get<int>();
      c.express_routes = cj.at("express_routes").get<int>();
      c.stop_spacing_m = cj.at("stop_spacing_m").get<double>();
      c.districts.clear();
      for (const auto& l : cj.at("districts")) {
        c.districts.push_back({l.at("alpha").get<double>(), l.at("beta").get<double>(),
                               l.at("dwell_s").get<double>()});
      }
      c.dwell_jitter_s = cj.at("dwell_jitter_s").get<double>();
      s.cities.push_back(std::move(c));
    }
    s.start_epoch_s = j.at("start_epoch_s").get<int64_t>();
    s.num_days = j.at("num_days").get<int>();
    s.first_departure_min = j.at("first_departure_min").get<int>();
    s.last_departure_min = j.at("last_departure_min").get<int>();
    s.headway_min = j.at("headway_min").get<int>();
    s.report_interval_s = j.at("report_interval_s").get<int>();
    s.position_noise_m = j.at("position_noise_m").get<double>();
    s.traffic_bucket_min = j.at("traffic_bucket_min").get<int>();
    s.base_speed_lo_mps = j.at("base_speed_lo_mps").get<double>();
    s.base_speed_hi_mps = j.at("base_speed_hi_mps").get<double>();
    s.diurnal = j.at("diurnal").get<std::array<double, 48>>();
    s.day_factor_sd = j.at("day_factor_sd").get<double>();
    s.traversal_noise_sd = j.at("traversal_noise_sd").get<double>();
    s.dwell_noise_sd = j.at("dwell_noise_sd").get<double>();
    s.traffic_noise_sd = j.at("traffic_noise_sd").get<double>();
    s.local_effect_fraction = j.at("local_effect_fraction").get<double>();
    s.local_effect_beta = j.at("local_effect_beta").get<double>();
    s.misspecification = j.at("misspecification").get<double>();
    s.seed = j.at("seed").get<uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("world spec: ") + e.what());
  }
  s.Validate();
  return s;
}

WorldSpec PresetWorld(const std::string& name, uint64_t seed) {
  WorldSpec s;
  s.seed = seed;
  const LatLng metro{10.3, 20.4};
  if (name == "tiny") {
    CitySpec c;
    c.name = "tiny";
    c.center = metro;
    c.blocks = 5;
    c.block_m = 300.0;
    c.num_routes = 2;
    c.districts = {{1.0, 0.02, 15.0}, {1.2, 0.0, 20.0}, {0.9, 0.04, 10.0}, {1.4, 0.01, 25.0}};
    s.cities = {c};
    s.num_days = 21;
    s.headway_min = 180;
    s.diurnal = WorldSpec::RushHourDiurnal(0.4);
    s.day_factor_sd = 0.1;
    s.traversal_noise_sd = 0.03;
    s.dwell_noise_sd = 0.1;
    return s;
  }
  if (name == "recovery" || name == "sparse_local") {
    CitySpec c;
    c.name = "metro";
    c.center = metro;
    c.blocks = 10;
    c.block_m = 400.0;
    c.num_routes = 6;
    c.districts = {{0.8, 0.08, 20.0}, {1.6, 0.0, 25.0}, {1.1, 0.05, 30.0}, {1.35, 0.03, 35.0}};
    c.dwell_jitter_s = 10.0;
    s.cities = {c};
    s.diurnal = WorldSpec::RushHourDiurnal(0.5);
    s.day_factor_sd = 0.15;
    s.traversal_noise_sd = 0.03;
    s.dwell_noise_sd = 0.1;
    if (name == "sparse_local") {
      s.cities[0].dwell_jitter_s = 0.0;
      s.local_effect_fraction = 0.1;
      s.local_effect_beta = 0.1;
    }
    return s;
  }
  if (name == "generalization") {
    CitySpec a;
    a.name = "alpha";
    a.center = metro;
    a.blocks = 8;
    a.num_routes = 4;
    a.express_routes = 1;
    a.districts = {{1.45, 0.06, 35.0}, {1.6, 0.05, 40.0}, {1.5, 0.07, 30.0}, {1.55, 0.06, 38.0}};
    CitySpec sat;
    sat.name = "satellite";
    sat.center = {10.3, 20.2};
    sat.blocks = 6;
    sat.num_routes = 2;
    sat.districts = {{1.5, 0.06, 36.0}};
    CitySpec b;
    b.name = "beta";
    b.center = {10.3, 33.0};
    b.blocks = 8;
    b.num_routes = 4;
    b.express_routes = 1;
    b.districts = {{0.85, 0.005, 12.0}, {0.9, 0.0, 15.0}, {0.8, 0.01, 10.0}, {0.95, 0.01, 14.0}};
    s.cities = {a, sat, b};
    s.headway_min = 90;
    s.diurnal = WorldSpec::RushHourDiurnal(0.4);
    s.day_factor_sd = 0.1;
    s.traversal_noise_sd = 0.03;
    s.dwell_noise_sd = 0.1;
    return s;
  }
  throw Error(ErrorCode::kNotFound, "unknown world preset " + name);
}

// --- world ------------------------------------------------------------------------

World::World(WorldSpec spec, Network network) : spec_(std::move(spec)), network_(std::move(network)) {
  spec_.Validate();
  std::map<std::string, int> city_index;
  for (size_t c = 0; c < spec_.cities.size(); ++c) city_index[spec_.cities[c].name] = static_cast<int>(c);
  const auto city_of = [&](const std::string& id) {
    auto it = city_index.find(CityPrefix(id));
    if (it == city_index.end()) throw Error(ErrorCode::kMismatch, "no city for id " + id);
    return it->second;
  };
  const auto law_of = [&](int city, const LatLng& p, int* district) {
    const CitySpec& c = spec_.cities[city];
    *district = DistrictOf(city, p);
    return c.districts.size() == 1 ? c.districts[0] : c.districts[*district - city * 4];
  };
  for (const auto& [id, shape] : network_.shapes) {
    const int city = city_of(id);
    shape_city_[id] = city;
    auto& laws = laws_[id];
    auto& speeds = base_speed_[id];
    for (int seg = 0; seg < shape.num_segments(); ++seg) {
      const LatLng end = shape.PointAt(shape.SegmentEnd(seg));
      SegmentLaw law;
      const DistrictLaw& d = law_of(city, end, &law.district);
      law.alpha = d.alpha;
      law.beta = d.beta;
      const CellId leaf = ModelCells(end)[0];
      law.local_effect =
          HashUniform(spec_.seed, "local:" + leaf.ToString()) < spec_.local_effect_fraction;
      if (law.local_effect) law.beta += spec_.local_effect_beta;
      laws.push_back(law);
      const double u = HashUniform(spec_.seed, "speed:" + id + "#" + std::to_string(seg));
      speeds.push_back(spec_.base_speed_lo_mps + u * (spec_.base_speed_hi_mps - spec_.base_speed_lo_mps));
    }
  }
  for (const auto& [id, stop] : network_.stops) {
    const int city = city_of(id);
    int district = 0;
    const DistrictLaw& d = law_of(city, stop.location, &district);
    const double u = HashUniform(spec_.seed, "dwell:" + id);
    dwell_[id] = std::max(0.0, d.dwell_s + spec_.cities[city].dwell_jitter_s * (2.0 * u - 1.0));
  }
  day_factor_.resize(spec_.cities.size());
  for (size_t c = 0; c < spec_.cities.size(); ++c) {
    for (int d = 0; d < spec_.num_days; ++d) {
      const double z = HashNormal(spec_.seed, "day:" + spec_.cities[c].name + "#" + std::to_string(d));
      day_factor_[c].push_back(std::exp(spec_.day_factor_sd * z));
    }
  }
}

int World::CityOfRoute(int route_index) const {
  if (route_index < 0 || route_index >= static_cast<int>(network_.routes.size())) {
    throw Error(ErrorCode::kNotFound, "route index " + std::to_string(route_index));
  }
  return CityOfShape(network_.routes[route_index].shape_id);
}

int World::CityOfShape(const std::string& shape_id) const {
  auto it = shape_city_.find(shape_id);
  if (it == shape_city_.end()) throw Error(ErrorCode::kNotFound, "unknown shape " + shape_id);
  return it->second;
}

const SegmentLaw& World::Law(const std::string& shape_id, int segment) const {
  auto it = laws_.find(shape_id);
  if (it == laws_.end() || segment < 0 || segment >= static_cast<int>(it->second.size())) {
    throw Error(ErrorCode::kNotFound, "unknown segment " + shape_id + "#" + std::to_string(segment));
  }
  return it->second[segment];
}

double World::Dwell(const std::string& stop_id) const {
  auto it = dwell_.find(stop_id);
  if (it == dwell_.end()) throw Error(ErrorCode::kNotFound, "unknown stop " + stop_id);
  return it->second;
}

int World::DistrictOf(int city, const LatLng& p) const {
  const CitySpec& c = spec_.cities.at(city);
  const CellId cell = ModelCells(p)[1];
  const XY xy = LocalFrame(c.center).ToXY(CellCenter(cell));
  return city * 4 + (xy.y >= 0.0 ? 2 : 0) + (xy.x >= 0.0 ? 1 : 0);
}

double World::Speed(const std::string& shape_id, int segment, double epoch_s) const {
  const int city = CityOfShape(shape_id);
  const auto& base = base_speed_.at(shape_id);
  if (segment < 0 || segment >= static_cast<int>(base.size())) {
    throw Error(ErrorCode::kNotFound, "unknown segment " + shape_id + "#" + std::to_string(segment));
  }
  const double rel = epoch_s - static_cast<double>(spec_.start_epoch_s);
  const int day = std::clamp(static_cast<int>(std::floor(rel / 86400.0)), 0, spec_.num_days - 1);
  const double tod = rel - 86400.0 * std::floor(rel / 86400.0);
  const int slot = std::clamp(static_cast<int>(tod / 1800.0), 0, 47);
  const double s = base[segment] * spec_.diurnal[slot] * day_factor_[city][day];
  return std::clamp(s, kMinSpeedMps, kMaxSpeedMps);
}

double World::Simulate(int route_index, double start_m, double end_m, double start_ts,
                       const TripNoise* noise,
                       std::vector<std::pair<double, double>>* path) const {
  if (route_index < 0 || route_index >= static_cast<int>(network_.routes.size())) {
    throw Error(ErrorCode::kNotFound, "route index " + std::to_string(route_index));
  }
  const Route& route = network_.routes[route_index];
  const TripShape& shape = network_.ShapeFor(route);
  if (!(start_m >= 0.0) || !(end_m <= shape.length_m() + 1e-9) || !(start_m <= end_m)) {
    throw Error(ErrorCode::kInvalidArgument, "interval outside route " + route.key.public_route_id);
  }
  const auto& laws = laws_.at(shape.shape_id);
  const double bucket_s = spec_.traffic_bucket_min * 60.0;
  const auto& offsets = route.stop_offsets;
  size_t si = std::lower_bound(offsets.begin(), offsets.end(), start_m) - offsets.begin();
  double x = start_m;
  double t = start_ts;
  if (path) path->emplace_back(t, x);
  while (true) {
    while (si < offsets.size() && offsets[si] <= x && offsets[si] < end_m) {
      double dwell = Dwell(route.key.stop_ids[si]);
      if (noise && !noise->dwell_factor.empty()) dwell *= noise->dwell_factor[si];
      t += dwell;
      ++si;
      if (path) path->emplace_back(t, x);
    }
    if (x >= end_m) break;
    const int seg = shape.SegmentIndexAt(x);
    double target = std::min(shape.SegmentEnd(seg), end_m);
    if (si < offsets.size()) target = std::min(target, offsets[si]);
    const SegmentLaw& law = laws[seg];
    const double s = Speed(shape.shape_id, seg, t);
    double rate = law.alpha / s + law.beta;
    if (spec_.misspecification > 0.0) rate += spec_.misspecification * (10.0 / s) * (10.0 / s) / 100.0;
    if (noise && !noise->segment_factor.empty()) rate *= noise->segment_factor[seg];
    const double bucket_end = (std::floor(t / bucket_s) + 1.0) * bucket_s;
    const double dt = (target - x) * rate;
    if (t + dt <= bucket_end) {
      x = target;
      t += dt;
    } else {
      x = std::min(target, x + (bucket_end - t) / rate);
      t = bucket_end;
    }
    if (path) path->emplace_back(t, x);
  }
  return t;
}

double World::OracleDuration(int route_index, double start_m, double end_m, double start_ts) const {
  return Simulate(route_index, start_m, end_m, start_ts) - start_ts;
}

TrafficTable World::TrueTraffic() const {
  TrafficTable table(spec_.traffic_bucket_min);
  const int64_t day0_min = spec_.start_epoch_s / 60;
  for (const auto& [id, shape] : network_.shapes) {
    for (int seg = 0; seg < shape.num_segments(); ++seg) {
      for (int d = 0; d < spec_.num_days; ++d) {
        for (int m = spec_.first_departure_min - kTrafficLeadMin;
             m < spec_.last_departure_min + kTrafficTailMin; m += spec_.traffic_bucket_min) {
          const int64_t bucket = day0_min + int64_t{d} * 1440 + m;
          table.Add({id, seg}, bucket, Speed(id, seg, bucket * 60.0));
        }
      }
    }
  }
  table.Finalize();
  return table;
}

// --- generation -------------------------------------------------------------------

WorldPaths WorldPaths::In(const std::filesystem::path& root) {
  return {root, root / "gtfs", root / "vehicle_positions.jsonl", root / "traffic.csv",
          root / "world.json"};
}

World LoadWorld(const std::filesystem::path& root) {
  const WorldPaths paths = WorldPaths::In(root);
  std::ifstream in(paths.spec);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + paths.spec.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("world.json: ") + e.what());
  }
  WorldSpec spec = WorldSpecFromJson(j);
  GtfsOptions opts;
  opts.feed_id = spec.feed_id;
  Network net = ParseGtfsStatic(paths.gtfs, opts);
  return World(std::move(spec), std::move(net));
}

World GenerateWorld(const WorldSpec& spec, const std::filesystem::path& root) {
  spec.Validate();
  const WorldPaths paths = WorldPaths::In(root);
  std::filesystem::create_directories(root);
  {
    auto out = OpenOut(paths.spec);
    out << WorldSpecToJson(spec).dump(1) << '\n';
  }
  WriteGtfs(spec, paths.gtfs);
  World world = LoadWorld(root);
  const Network& net = world.network();

  {
    auto out = OpenOut(paths.vehicle_positions);
    std::string line;
    std::vector<std::pair<double, double>> path;
    for (int ri = 0; ri < static_cast<int>(net.routes.size()); ++ri) {
      const Route& route = net.routes[ri];
      const TripShape& shape = net.ShapeFor(route);
      for (const std::string& trip : route.trip_ids) {
        const int dep = DepartureMinute(trip);
        for (int d = 0; d < spec.num_days; ++d) {
          Rng rng(DeriveSeed(spec.seed, "trip:" + trip + "#" + std::to_string(d)));
          TripNoise noise;
          for (int s = 0; s < shape.num_segments(); ++s) {
            noise.segment_factor.push_back(std::exp(spec.traversal_noise_sd * rng.Normal()));
          }
          for (size_t s = 0; s < route.stop_offsets.size(); ++s) {
            noise.dwell_factor.push_back(std::exp(spec.dwell_noise_sd * rng.Normal()));
          }
          const double t0 = static_cast<double>(spec.start_epoch_s + int64_t{d} * 86400 + dep * 60);
          path.clear();
          const double t_end = world.Simulate(ri, 0.0, shape.length_m(), t0, &noise, &path);
          size_t k = 0;
          const auto emit = [&](int64_t ts) {
            while (k + 1 < path.size() && path[k + 1].first < static_cast<double>(ts)) ++k;
            double x = path[k].second;
            if (k + 1 < path.size()) {
              const auto& [ta, xa] = path[k];
              const auto& [tb, xb] = path[k + 1];
              x = tb > ta ? xa + (xb - xa) * std::clamp((ts - ta) / (tb - ta), 0.0, 1.0) : xb;
            }
            const LatLng on = shape.PointAt(x);
            const LocalFrame frame(on);
            const LatLng p = frame.ToLatLng(
                {spec.position_noise_m * rng.Normal(), spec.position_noise_m * rng.Normal()});
            line = "{\"vehicle_id\":\"" + trip + "\",\"feed_id\":\"" + spec.feed_id +
                   "\",\"trip_id\":\"" + trip + "\",\"ts\":" + std::to_string(ts) +
                   ",\"lat\":" + Num(p.lat) + ",\"lng\":" + Num(p.lng) + "}\n";
            out << line;
          };
          const int64_t first = static_cast<int64_t>(t0);
          int64_t ts = first;
          for (; static_cast<double>(ts) <= t_end; ts += spec.report_interval_s) emit(ts);
          const int64_t last = static_cast<int64_t>(std::ceil(t_end));
          if (ts - spec.report_interval_s < last) emit(last);
        }
      }
    }
  }

  {
    auto out = OpenOut(paths.traffic);
    out << "shape_id,segment_index,bucket_epoch_min,speed_mps\n";
    const int64_t day0_min = spec.start_epoch_s / 60;
    std::string line;
    for (const auto& [id, shape] : net.shapes) {
      for (int seg = 0; seg < shape.num_segments(); ++seg) {
        for (int d = 0; d < spec.num_days; ++d) {
          for (int m = spec.first_departure_min - kTrafficLeadMin;
               m < spec.last_departure_min + kTrafficTailMin; m += spec.traffic_bucket_min) {
            const int64_t bucket = day0_min + int64_t{d} * 1440 + m;
            double s = world.Speed(id, seg, bucket * 60.0);
            if (spec.traffic_noise_sd > 0.0) {
              const double z = HashNormal(spec.seed, "obs:" + id + "#" + std::to_string(seg) + "#" +
                                                         std::to_string(bucket));
              s = std::clamp(s * std::exp(spec.traffic_noise_sd * z), kMinSpeedMps, kMaxSpeedMps);
            }
            line = id + ',' + std::to_string(seg) + ',' + std::to_string(bucket) + ',' + Num(s) + '\n';
            out << line;
          }
        }
      }
    }
  }
  return world;
}

}  // namespace bustr
