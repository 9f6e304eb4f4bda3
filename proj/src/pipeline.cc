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

#include "bustr/pipeline.h"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "bustr/error.h"

namespace bustr {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitList(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T ParseNumber(const std::string& v) {
  T out{};
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw std::invalid_argument("not a number: '" + v + "'");
  }
  return out;
}

bool ParseBool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("not a boolean: '" + v + "'");
}

std::string Join(const std::vector<std::string>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + xs[i];
  return out;
}

std::string Num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

struct Field {
  std::function<void(PipelineConfig&, const std::string&, const std::filesystem::path&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define BUSTR_NUM(key, T, member)                                                        \
  {key, Field{[](PipelineConfig& c, const std::string& v, const std::filesystem::path&) { \
                c.member = ParseNumber<T>(v);                                           \
              },                                                                          \
              [](const PipelineConfig& c) {                                               \
                if constexpr (std::is_floating_point_v<T>) return Num(c.member);          \
                else return std::to_string(c.member);                                     \
              }}}
#define BUSTR_BOOL(key, member)                                                          \
  {key, Field{[](PipelineConfig& c, const std::string& v, const std::filesystem::path&) { \
                c.member = ParseBool(v);                                                \
              },                                                                          \
              [](const PipelineConfig& c) { return std::string(c.member ? "true" : "false"); }}}
#define BUSTR_PATH(key, member)                                                              \
  {key, Field{[](PipelineConfig& c, const std::string& v, const std::filesystem::path& base) { \
                std::filesystem::path p(v);                                                 \
                c.member = p.is_relative() && !base.empty() ? base / p : p;                  \
              },                                                                              \
              [](const PipelineConfig& c) { return c.member.string(); }}}
#define BUSTR_LIST(key, member)                                                          \
  {key, Field{[](PipelineConfig& c, const std::string& v, const std::filesystem::path&) { \
                c.member = SplitList(v);                                                \
              },                                                                          \
              [](const PipelineConfig& c) { return Join(c.member); }}}

const std::map<std::string, Field>& Fields() {
  static const std::map<std::string, Field> fields = {
      BUSTR_PATH("gtfs_dir", gtfs_dir),
      BUSTR_PATH("vehicle_positions", vehicle_positions),
      BUSTR_PATH("traffic", traffic),
      {"feed_id", Field{[](PipelineConfig& c, const std::string& v,
                           const std::filesystem::path&) { c.feed_id = v; },
                        [](const PipelineConfig& c) { return c.feed_id; }}},
      BUSTR_NUM("traffic_bucket_minutes", int, traffic_bucket_minutes),
      BUSTR_NUM("turn_threshold_deg", double, gtfs.turn_threshold_deg),
      BUSTR_NUM("max_segment_m", double, gtfs.max_segment_m),
      BUSTR_NUM("snap_tolerance_m", double, traces.snap_tolerance_m),
      BUSTR_NUM("split_gap_s", int64_t, traces.split_gap_s),
      BUSTR_NUM("min_len_lo_m", double, shingler.min_len_lo_m),
      BUSTR_NUM("min_len_hi_m", double, shingler.min_len_hi_m),
      BUSTR_NUM("stop_exclusion_m", double, shingler.stop_exclusion_m),
      BUSTR_NUM("min_start_spacing_s", int64_t, shingler.min_start_spacing_s),
      BUSTR_NUM("max_gap_s", int64_t, shingler.max_gap_s),
      BUSTR_NUM("max_gap_m", double, shingler.max_gap_m),
      BUSTR_NUM("min_speed_kmh", double, shingler.min_speed_kmh),
      BUSTR_NUM("max_speed_kmh", double, shingler.max_speed_kmh),
      BUSTR_LIST("train_weeks", weeks.train),
      BUSTR_LIST("validation_weeks", weeks.validation),
      BUSTR_LIST("test_weeks", weeks.test),
      BUSTR_NUM("steps", int64_t, train.steps),
      BUSTR_NUM("batch", int, train.batch),
      BUSTR_NUM("learning_rate", double, train.learning_rate),
      BUSTR_NUM("decay", double, train.decay),
      BUSTR_NUM("decay_every", int64_t, train.decay_every),
      BUSTR_NUM("eval_every", int64_t, train.eval_every),
      BUSTR_NUM("eval_samples", int64_t, train.eval_samples),
      BUSTR_NUM("reg_weight", double, train.reg_weight),
      BUSTR_NUM("reg_base", double, train.reg_base),
      BUSTR_NUM("select_eps", double, train.select_eps),
      BUSTR_BOOL("feature_selection", train.feature_selection),
      BUSTR_BOOL("use_sia", train.use_sia),
      {"sia_rates", Field{[](PipelineConfig& c, const std::string& v,
                             const std::filesystem::path&) {
                            const auto parts = SplitList(v);
                            if (parts.size() != 3) {
                              throw std::invalid_argument("sia_rates needs 3 values");
                            }
                            for (int i = 0; i < 3; ++i) c.train.sia.p[i] = ParseNumber<double>(parts[i]);
                          },
                          [](const PipelineConfig& c) {
                            return Num(c.train.sia.p[0]) + "," + Num(c.train.sia.p[1]) + "," +
                                   Num(c.train.sia.p[2]);
                          }}},
      BUSTR_NUM("d_route", int, train.model.d_route),
      BUSTR_NUM("d_hour", int, train.model.d_hour),
      BUSTR_NUM("d_dow", int, train.model.d_dow),
      BUSTR_NUM("d_spatial", int, train.model.d_spatial),
      BUSTR_NUM("hidden", int, train.model.hidden),
      BUSTR_NUM("init_stddev", double, train.model.init_stddev),
      BUSTR_NUM("seed", uint64_t, train.seed),
      BUSTR_NUM("threads", int, train.threads),
      BUSTR_NUM("trials", int, trials),
      BUSTR_LIST("variants", variants),
  };
  return fields;
}

#undef BUSTR_NUM
#undef BUSTR_BOOL
#undef BUSTR_PATH
#undef BUSTR_LIST

}  // namespace

PipelineConfig PipelineConfig::Parse(std::istream& in, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto where = "config:" + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kParse, where + "expected key = value");
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    auto it = Fields().find(key);
    if (it == Fields().end()) throw Error(ErrorCode::kParse, where + "unknown key " + key);
    if (!seen.insert(key).second) throw Error(ErrorCode::kParse, where + "repeated key " + key);
    try {
      it->second.set(c, value, base_dir);
    } catch (const std::invalid_argument& e) {
      throw Error(ErrorCode::kParse, where + key + ": " + e.what());
    }
  }
  try {
    c.train.Validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kParse, "config: " + e.detail());
  }
  if (c.trials < 1) throw Error(ErrorCode::kParse, "config: trials must be >= 1");
  for (const auto& v : c.variants) {
    try {
      ParseVariant(v);
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, "config: " + e.detail());
    }
  }
  return c;
}

PipelineConfig PipelineConfig::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  return Parse(in, path.parent_path());
}

void PipelineConfig::Write(std::ostream& out) const {
  for (const auto& [key, field] : Fields()) out << key << " = " << field.get(*this) << '\n';
}

Corpus LoadCorpus(const PipelineConfig& config) {
  GtfsOptions gtfs = config.gtfs;
  if (!config.feed_id.empty()) gtfs.feed_id = config.feed_id;
  Corpus c{ParseGtfsStatic(config.gtfs_dir, gtfs), {}, TrafficTable(config.traffic_bucket_minutes), {}};
  ParsedTraces traces = ParseVehiclePositions(config.vehicle_positions, c.network, config.traces);
  c.traces = std::move(traces.traces);
  c.counters.Merge(traces.counters);
  ParsedTraffic traffic = ParseTraffic(config.traffic, config.traffic_bucket_minutes);
  c.traffic = std::move(traffic.table);
  for (const auto& [k, v] : traffic.counters.all()) c.counters.Add("traffic_" + k, v);
  return c;
}

std::vector<QuantizedShingle> BuildShingles(const Network& network, std::span<const Trace> traces,
                                            const ShinglerConfig& config, uint64_t seed,
                                            Counters* counters) {
  const Quantizer quantizer(network);
  std::vector<QuantizedShingle> out;
  for (Shingle& s : ExtractAllShingles(network, traces, config, seed, counters)) {
    auto quanta = quantizer.Quantize(s);
    out.push_back({std::move(s), std::move(quanta)});
  }
  return out;
}

SplitShingles SplitItems(std::vector<QuantizedShingle> items, const WeekAssignment& weeks) {
  std::vector<int64_t> ts;
  ts.reserve(items.size());
  for (const auto& it : items) ts.push_back(it.shingle.start_ts);
  SplitShingles out;
  out.split = SplitByWeek(ts, weeks);
  for (size_t i : out.split.train) out.train.push_back(std::move(items[i]));
  for (size_t i : out.split.validation) out.validation.push_back(std::move(items[i]));
  for (size_t i : out.split.test) out.test.push_back(std::move(items[i]));
  return out;
}

namespace {

std::ofstream OpenOut(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

std::ifstream OpenIn(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return in;
}

nlohmann::ordered_json WeeksJson(const WeekAssignment& w) {
  return {{"train", w.train}, {"validation", w.validation}, {"test", w.test}};
}

}  // namespace

void SaveSplit(const std::filesystem::path& dir, const SplitShingles& split) {
  std::filesystem::create_directories(dir);
  auto train = OpenOut(dir / "train.jsonl");
  WriteShinglesJsonl(train, split.train);
  auto validation = OpenOut(dir / "validation.jsonl");
  WriteShinglesJsonl(validation, split.validation);
  auto test = OpenOut(dir / "test.jsonl");
  WriteShinglesJsonl(test, split.test);
  nlohmann::ordered_json j;
  j["weeks"] = WeeksJson(split.split.weeks);
  j["counts"] = {{"train", split.train.size()},
                 {"validation", split.validation.size()},
                 {"test", split.test.size()}};
  j["warnings"] = split.split.warnings;
  OpenOut(dir / "split.json") << j.dump(2) << '\n';
}

SplitShingles LoadSplit(const std::filesystem::path& dir) {
  SplitShingles out;
  auto train = OpenIn(dir / "train.jsonl");
  out.train = ReadShinglesJsonl(train);
  auto validation = OpenIn(dir / "validation.jsonl");
  out.validation = ReadShinglesJsonl(validation);
  auto test = OpenIn(dir / "test.jsonl");
  out.test = ReadShinglesJsonl(test);
  return out;
}

void SaveModel(const std::filesystem::path& dir, const TrainedModel& model) {
  std::filesystem::create_directories(dir);
  model.ToCheckpoint().Save(dir / "checkpoint.json");
  auto route = OpenOut(dir / ("vocab_" + model.vocabs.route.name() + ".txt"));
  model.vocabs.route.Write(route);
  for (const Vocab& v : model.vocabs.cells) {
    auto out = OpenOut(dir / ("vocab_" + v.name() + ".txt"));
    v.Write(out);
  }
  auto report = OpenOut(dir / "train_report.csv");
  WriteTrainReportCsv(report, model.report);
}

TrainedModel LoadModel(const std::filesystem::path& dir) {
  const Checkpoint ck = Checkpoint::Load(dir / "checkpoint.json");
  const auto read = [&](const std::string& name) {
    auto in = OpenIn(dir / ("vocab_" + name + ".txt"));
    return Vocab::Read(name, in);
  };
  TrainedModel m;
  m.vocabs.route = read("route");
  for (int l = 0; l < kNumCellLevels; ++l) {
    m.vocabs.cells[l] = read(std::string("cell_") + kCellLevelNames[l]);
  }
  ck.CheckVocabs(m.vocabs);
  m.params = ck.params;
  m.features = ck.features;
  if (ck.metadata.contains("best_step")) m.report.best_step = ck.metadata["best_step"].get<int64_t>();
  if (ck.metadata.contains("cells_before")) {
    m.report.cells_before = ck.metadata["cells_before"].get<std::array<size_t, kNumCellLevels>>();
  }
  if (ck.metadata.contains("cells_after")) {
    m.report.cells_after = ck.metadata["cells_after"].get<std::array<size_t, kNumCellLevels>>();
  }
  if (ck.metadata.contains("best_val_mape")) {
    m.report.best_mape = ck.metadata["best_val_mape"].get<double>();
  }
  return m;
}

}  // namespace bustr
