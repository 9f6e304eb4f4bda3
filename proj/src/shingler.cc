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

#include "bustr/shingler.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "bustr/error.h"
#include "bustr/timeutil.h"

namespace bustr {
namespace {

constexpr double kExtentEpsM = 1e-6;

void Count(Counters* c, const char* name) {
  if (c != nullptr) c->Add(name);
}

}  // namespace

std::array<CellId, 3> ModelCells(const LatLng& p) {
  const CellId leaf = CellAt(p, GridLevel::FromTwice(kModelTwiceLevels[0]));
  return {leaf, Parent(leaf, GridLevel::FromTwice(kModelTwiceLevels[1])),
          Parent(leaf, GridLevel::FromTwice(kModelTwiceLevels[2]))};
}

std::vector<Shingle> ExtractShinglesWithDraw(const Trace& trace, const Route& route,
                                             const ShinglerConfig& config,
                                             double min_len_m, Counters* counters) {
  std::vector<const VehiclePositionReport*> reports;
  reports.reserve(trace.reports.size());
  for (const auto& r : trace.reports) {
    if (r.along_m) reports.push_back(&r);
  }
  const size_t n = reports.size();
  std::vector<bool> admissible(n, true);
  for (size_t i = 0; i < n; ++i) {
    const double a = *reports[i]->along_m;
    for (double off : route.stop_offsets) {
      if (std::fabs(a - off) <= config.stop_exclusion_m) {
        admissible[i] = false;
        break;
      }
    }
    if (!admissible[i]) Count(counters, "report_near_stop");
  }

  std::vector<Shingle> out;
  std::optional<int64_t> last_start;
  for (size_t s = 0; s < n; ++s) {
    if (!admissible[s]) continue;
    const int64_t ts0 = reports[s]->timestamp;
    const double a0 = *reports[s]->along_m;
    if (last_start && ts0 < *last_start + config.min_start_spacing_s) {
      Count(counters, "rejected_start_spacing");
      continue;
    }
    size_t e = s + 1;
    while (e < n && !(admissible[e] && *reports[e]->along_m - a0 >= min_len_m)) ++e;
    if (e == n) {
      Count(counters, "rejected_no_end");
      continue;
    }
    bool gap_ok = true;
    for (size_t k = s + 1; k <= e && gap_ok; ++k) {
      if (reports[k]->timestamp - reports[k - 1]->timestamp > config.max_gap_s) {
        Count(counters, "rejected_gap_time");
        gap_ok = false;
      } else if (std::fabs(*reports[k]->along_m - *reports[k - 1]->along_m) >
                 config.max_gap_m) {
        Count(counters, "rejected_gap_distance");
        gap_ok = false;
      }
    }
    if (!gap_ok) continue;
    const double a1 = *reports[e]->along_m;
    const int64_t ts1 = reports[e]->timestamp;
    const double kmh = (a1 - a0) / static_cast<double>(ts1 - ts0) * 3.6;
    if (kmh < config.min_speed_kmh || kmh > config.max_speed_kmh) {
      Count(counters, "rejected_speed");
      continue;
    }
    Shingle sh;
    sh.route_index = trace.route_index;
    sh.route = route.key;
    sh.shape_id = route.shape_id;
    sh.trace_id = trace.Id();
    sh.start_m = a0;
    sh.end_m = a1;
    sh.start_ts = ts0;
    sh.end_ts = ts1;
    out.push_back(std::move(sh));
    Count(counters, "shingles_emitted");
    last_start = ts0;
  }
  return out;
}

std::vector<Shingle> ExtractShingles(const Trace& trace, const Route& route,
                                     const ShinglerConfig& config, Rng& rng,
                                     Counters* counters) {
  const double draw = rng.Uniform(config.min_len_lo_m, config.min_len_hi_m);
  return ExtractShinglesWithDraw(trace, route, config, draw, counters);
}

std::vector<Shingle> ExtractAllShingles(const Network& network,
                                        std::span<const Trace> traces,
                                        const ShinglerConfig& config, uint64_t seed,
                                        Counters* counters) {
  std::vector<Shingle> out;
  for (const Trace& t : traces) {
    Rng rng(DeriveSeed(seed, t.Id()));
    auto part = ExtractShingles(t, network.routes.at(t.route_index), config, rng, counters);
    out.insert(out.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return out;
}

// --- quantization -------------------------------------------------------------

Quantizer::Quantizer(const Network& network) : network_(network) {
  for (const auto& [id, shape] : network.shapes) {
    auto& cells = segment_cells_[id];
    cells.reserve(shape.num_segments());
    for (int s = 0; s < shape.num_segments(); ++s) {
      cells.push_back(ModelCells(shape.PointAt(shape.SegmentEnd(s))));
    }
  }
  for (const auto& [id, stop] : network.stops) stop_cells_[id] = ModelCells(stop.location);
}

std::vector<Quantum> Quantizer::Quantize(int route_index, double start_m, double end_m,
                                         Stops stops) const {
  if (route_index < 0 || route_index >= static_cast<int>(network_.routes.size())) {
    throw Error(ErrorCode::kNotFound, "route index " + std::to_string(route_index));
  }
  const Route& route = network_.routes[route_index];
  const TripShape& shape = network_.ShapeFor(route);
  if (!(start_m >= -kExtentEpsM) || !(end_m <= shape.length_m() + kExtentEpsM) ||
      !(end_m >= start_m)) {
    throw Error(ErrorCode::kInvalidArgument,
                "interval [" + std::to_string(start_m) + ", " + std::to_string(end_m) +
                    "] outside shape " + shape.shape_id);
  }
  const auto& seg_cells = segment_cells_.at(shape.shape_id);

  struct Item {
    double pos;
    int kind_order;  // stops sort before a segment starting at the same offset
    size_t seq;
    Quantum q;
  };
  std::vector<Item> items;
  for (int seg = shape.SegmentIndexAt(start_m);
       seg < shape.num_segments() && shape.SegmentStart(seg) < end_m; ++seg) {
    const double lo = std::max(start_m, shape.SegmentStart(seg));
    const double hi = std::min(end_m, shape.SegmentEnd(seg));
    if (hi - lo <= 0.0) continue;
    Quantum q;
    q.kind = QuantumKind::kSegment;
    q.cells = seg_cells[seg];
    q.position_m = lo;
    q.traversed_m = hi - lo;
    q.segment_index = seg;
    items.push_back({lo, 1, items.size(), std::move(q)});
  }
  for (size_t i = 0; i < route.stop_offsets.size(); ++i) {
    const double off = route.stop_offsets[i];
    const bool inside = stops == Stops::kInterior ? (off > start_m && off < end_m)
                                                  : (off >= start_m && off <= end_m);
    if (!inside) continue;
    Quantum q;
    q.kind = QuantumKind::kStop;
    q.stop_id = route.key.stop_ids[i];
    q.cells = stop_cells_.at(q.stop_id);
    q.position_m = off;
    items.push_back({off, 0, items.size(), std::move(q)});
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    if (a.pos != b.pos) return a.pos < b.pos;
    if (a.kind_order != b.kind_order) return a.kind_order < b.kind_order;
    return a.seq < b.seq;
  });
  std::vector<Quantum> out;
  out.reserve(items.size());
  for (auto& it : items) out.push_back(std::move(it.q));
  return out;
}

// --- week split ---------------------------------------------------------------

WeekSplit SplitByWeek(std::span<const int64_t> start_ts, const WeekAssignment& weeks) {
  WeekSplit out;
  std::vector<std::string> example_weeks;
  example_weeks.reserve(start_ts.size());
  std::map<std::string, size_t> counts;
  for (int64_t ts : start_ts) {
    example_weeks.push_back(IsoWeek(ts));
    ++counts[example_weeks.back()];
  }
  out.weeks = weeks;
  if (weeks.empty()) {
    std::vector<std::string> seen;
    for (const auto& [w, n] : counts) seen.push_back(w);
    if (!seen.empty()) {
      out.weeks.test.push_back(seen.back());
      seen.pop_back();
    }
    if (!seen.empty()) {
      out.weeks.validation.push_back(seen.back());
      seen.pop_back();
    }
    out.weeks.train = seen;
  }
  std::map<std::string, int> role;
  const auto assign = [&](const std::vector<std::string>& ws, int r) {
    for (const auto& w : ws) {
      IsoWeekStart(w);  // validates the format
      auto [it, inserted] = role.emplace(w, r);
      if (!inserted && it->second != r) {
        throw Error(ErrorCode::kInvalidArgument, "week " + w + " assigned to two splits");
      }
      if (!counts.count(w)) out.warnings.push_back("week " + w + " has no examples");
    }
  };
  assign(out.weeks.train, 0);
  assign(out.weeks.validation, 1);
  assign(out.weeks.test, 2);
  for (size_t i = 0; i < example_weeks.size(); ++i) {
    auto it = role.find(example_weeks[i]);
    if (it == role.end()) continue;
    (it->second == 0 ? out.train : it->second == 1 ? out.validation : out.test).push_back(i);
  }
  return out;
}

// --- JSONL ---------------------------------------------------------------------

void WriteShinglesJsonl(std::ostream& out, std::span<const QuantizedShingle> items) {
  for (const auto& item : items) {
    const Shingle& s = item.shingle;
    nlohmann::ordered_json j;
    j["route_index"] = s.route_index;
    j["feed_id"] = s.route.feed_id;
    j["public_route_id"] = s.route.public_route_id;
    j["ordered_stop_ids"] = s.route.stop_ids;
    j["shape_id"] = s.shape_id;
    j["trace_id"] = s.trace_id;
    j["start_m"] = s.start_m;
    j["end_m"] = s.end_m;
    j["start_ts"] = s.start_ts;
    j["end_ts"] = s.end_ts;
    j["duration_s"] = s.end_ts - s.start_ts;
    auto& qs = j["quanta"] = nlohmann::ordered_json::array();
    for (const auto& q : item.quanta) {
      nlohmann::ordered_json jq;
      jq["kind"] = q.kind == QuantumKind::kStop ? "stop" : "segment";
      jq["cell15"] = q.cells[0].ToString();
      jq["cell12_5"] = q.cells[1].ToString();
      jq["cell4_5"] = q.cells[2].ToString();
      jq["position_m"] = q.position_m;
      if (q.kind == QuantumKind::kSegment) {
        jq["traversed_m"] = q.traversed_m;
        jq["segment_index"] = q.segment_index;
      } else {
        jq["stop_id"] = q.stop_id;
      }
      qs.push_back(std::move(jq));
    }
    out << j.dump() << '\n';
  }
}

std::vector<QuantizedShingle> ReadShinglesJsonl(std::istream& in) {
  std::vector<QuantizedShingle> out;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      QuantizedShingle item;
      Shingle& s = item.shingle;
      s.route_index = j.at("route_index").get<int>();
      s.route.feed_id = j.at("feed_id").get<std::string>();
      s.route.public_route_id = j.at("public_route_id").get<std::string>();
      s.route.stop_ids = j.at("ordered_stop_ids").get<std::vector<std::string>>();
      s.shape_id = j.at("shape_id").get<std::string>();
      s.trace_id = j.at("trace_id").get<std::string>();
      s.start_m = j.at("start_m").get<double>();
      s.end_m = j.at("end_m").get<double>();
      s.start_ts = j.at("start_ts").get<int64_t>();
      s.end_ts = j.at("end_ts").get<int64_t>();
      for (const auto& jq : j.at("quanta")) {
        Quantum q;
        const std::string kind = jq.at("kind").get<std::string>();
        if (kind != "stop" && kind != "segment") throw Error(ErrorCode::kParse, "bad kind");
        q.kind = kind == "stop" ? QuantumKind::kStop : QuantumKind::kSegment;
        q.cells = {CellId::FromString(jq.at("cell15").get<std::string>()),
                   CellId::FromString(jq.at("cell12_5").get<std::string>()),
                   CellId::FromString(jq.at("cell4_5").get<std::string>())};
        q.position_m = jq.at("position_m").get<double>();
        if (q.kind == QuantumKind::kSegment) {
          q.traversed_m = jq.at("traversed_m").get<double>();
          q.segment_index = jq.at("segment_index").get<int>();
        } else {
          q.stop_id = jq.at("stop_id").get<std::string>();
        }
        item.quanta.push_back(std::move(q));
      }
      out.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, "shingles.jsonl:" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse,
                  "shingles.jsonl:" + std::to_string(line_no) + ": " + e.detail());
    }
  }
  return out;
}

}  // namespace bustr
