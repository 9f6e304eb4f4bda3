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

#include "bustr/model.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "bustr/error.h"

namespace bustr {
namespace {

constexpr int kCheckpointVersion = 1;

void FillNormal(std::span<double> v, Rng& rng, double stddev) {
  for (double& x : v) x = rng.Normal(0.0, stddev);
}

void CheckIndex(int32_t idx, int32_t lo, int32_t rows, const char* what) {
  if (idx < lo || idx >= rows) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(what) + " index " + std::to_string(idx) + " outside [" +
                    std::to_string(lo) + ", " + std::to_string(rows) + ")");
  }
}

}  // namespace

const char* TableName(int table) {
  switch (table) {
    case kRouteTable:
      return "route";
    case kHourTable:
      return "hour";
    case kDowTable:
      return "dow";
    case kCellTable15:
      return "cell_15";
    case kCellTable12_5:
      return "cell_12.5";
    case kCellTable4_5:
      return "cell_4.5";
  }
  return "?";
}

void ModelConfig::Validate() const {
  if (d_route < 0 || d_hour < 0 || d_dow < 0 || d_spatial < 0 || hidden <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "model dimensions must be non-negative, hidden > 0");
  }
  if (!(init_stddev >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "init_stddev must be >= 0");
}

TableSizes TableSizes::Of(const Vocabs& v) {
  TableSizes s;
  s.route = v.route.size();
  for (int l = 0; l < kNumCellLevels; ++l) s.cells[l] = v.cells[l].size();
  return s;
}

bool Params::AllFinite() const {
  for (const auto& t : tables) {
    for (double v : t.data) {
      if (!std::isfinite(v)) return false;
    }
  }
  bool ok = true;
  ForEachDense([&](const char*, std::span<const double> v) {
    for (double x : v) ok = ok && std::isfinite(x);
  });
  return ok;
}

Params InitParams(const ModelConfig& config, const TableSizes& sizes, Rng& rng) {
  config.Validate();
  Params p;
  p.config = config;
  const int k = config.hidden;
  p.tables[kRouteTable] = Tensor2(static_cast<int>(sizes.route), config.d_route);
  p.tables[kHourTable] = Tensor2(kHourSlices, config.d_hour);
  p.tables[kDowTable] = Tensor2(kDaysOfWeek, config.d_dow);
  for (int l = 0; l < kNumCellLevels; ++l) {
    p.tables[CellTable(l)] = Tensor2(static_cast<int>(sizes.cells[l]), config.d_spatial);
  }
  // Fixed fill order keeps the parameter stream stable.
  for (int t = 0; t < kNumTables; ++t) {
    Tensor2& tab = p.tables[t];
    for (int r = 0; r < tab.rows; ++r) {
      if (HasAbsentRow(t) && r == 0) continue;
      FillNormal({tab.row(r), static_cast<size_t>(tab.cols)}, rng, config.init_stddev);
    }
  }
  for (int h = 0; h < kHourSlices && config.d_hour >= 2; ++h) {
    const double angle = 2.0 * std::numbers::pi * h / kHourSlices;
    p.tables[kHourTable].at(h, 0) = std::cos(angle);
    p.tables[kHourTable].at(h, 1) = std::sin(angle);
  }
  p.w1 = Tensor2(k, config.input_dim());
  p.b1.assign(k, 0.0);
  p.w2_stop = Tensor2(1, k);
  p.b2_stop.assign(1, 0.0);
  const int seg_out = config.generic_numeric_inputs ? 1 : 2;
  p.w2_seg = Tensor2(seg_out, k);
  p.b2_seg.assign(seg_out, 0.0);
  p.ForEachDense([&](const char*, std::span<double> v) { FillNormal(v, rng, config.init_stddev); });
  return p;
}

double Forward(const ExampleFeatures& x, const Params& p, ForwardTrace& trace) {
  const ModelConfig& cfg = p.config;
  const int k = cfg.hidden;
  const int in = cfg.input_dim();
  const int ds = cfg.d_spatial;
  const int cd = cfg.context_dim();
  const int nq = static_cast<int>(x.quanta.size());

  CheckIndex(x.route, 0, p.tables[kRouteTable].rows, "route");
  CheckIndex(x.hour_slice, kAbsentTime, kHourSlices, "hour slice");
  CheckIndex(x.dow, kAbsentTime, kDaysOfWeek, "day of week");

  trace.num_quanta = nq;
  trace.kinds.resize(nq);
  trace.context_ids = {x.route, x.hour_slice, x.dow};
  trace.context.assign(cd, 0.0);
  trace.inputs.assign(static_cast<size_t>(nq) * in, 0.0);
  trace.hidden_pre.resize(static_cast<size_t>(nq) * k);
  trace.heads.assign(static_cast<size_t>(nq) * 2, 0.0);
  trace.pre_clip.resize(nq);
  trace.durations.resize(nq);

  double* c = trace.context.data();
  if (cfg.use_route && x.route != Vocab::kAbsent) {
    std::copy_n(p.tables[kRouteTable].row(x.route), cfg.d_route, c);
  }
  if (cfg.use_time && x.hour_slice != kAbsentTime) {
    std::copy_n(p.tables[kHourTable].row(x.hour_slice), cfg.d_hour, c + cfg.d_route);
  }
  if (cfg.use_time && x.dow != kAbsentTime) {
    std::copy_n(p.tables[kDowTable].row(x.dow), cfg.d_dow, c + cfg.d_route + cfg.d_hour);
  }
  // The context part of the hidden pre-activation is shared by all quanta.
  std::vector<double> ctx_pre(p.b1);
  for (int j = 0; j < k; ++j) {
    const double* w = p.w1.row(j) + ds;
    double acc = 0.0;
    for (int i = 0; i < cd; ++i) acc += w[i] * c[i];
    ctx_pre[j] += acc;
  }

  double total = 0.0;
  for (int q = 0; q < nq; ++q) {
    const QuantumFeatures& f = x.quanta[q];
    trace.kinds[q] = f.kind;
    double* xin = trace.inputs.data() + static_cast<size_t>(q) * in;
    for (int l = 0; l < kNumCellLevels; ++l) {
      const Tensor2& tab = p.tables[CellTable(l)];
      CheckIndex(f.cells[l], 0, tab.rows, "cell");
      if (!cfg.use_cells[l] || f.cells[l] == Vocab::kAbsent) continue;
      const double* e = tab.row(f.cells[l]);
      for (int i = 0; i < ds; ++i) xin[i] += e[i];
    }
    std::copy_n(c, cd, xin + ds);
    const bool segment = f.kind == QuantumKind::kSegment;
    if (segment && !(f.s > 0.0 && std::isfinite(f.s) && f.d >= 0.0 && std::isfinite(f.d))) {
      throw Error(ErrorCode::kInvalidArgument, "segment needs finite d >= 0 and s > 0");
    }
    if (cfg.generic_numeric_inputs && segment) {
      xin[ds + cd] = f.d / kGenericDistanceScaleM;
      xin[ds + cd + 1] = f.d / f.s / kGenericCarTimeScaleS;
    }
    double* z = trace.hidden_pre.data() + static_cast<size_t>(q) * k;
    for (int j = 0; j < k; ++j) {
      const double* w = p.w1.row(j);
      double acc = ctx_pre[j];
      for (int i = 0; i < ds; ++i) acc += w[i] * xin[i];
      if (cfg.generic_numeric_inputs) {
        acc += w[ds + cd] * xin[ds + cd] + w[ds + cd + 1] * xin[ds + cd + 1];
      }
      z[j] = acc;
    }
    double* heads = trace.heads.data() + static_cast<size_t>(q) * 2;
    const auto head = [&](const double* w, double bias) {
      double acc = bias;
      for (int j = 0; j < k; ++j) acc += w[j] * (z[j] > 0.0 ? z[j] : 0.0);
      return acc;
    };
    double pre;
    if (!segment) {
      heads[0] = head(p.w2_stop.row(0), p.b2_stop[0]);
      pre = heads[0];
    } else if (cfg.generic_numeric_inputs) {
      heads[0] = head(p.w2_seg.row(0), p.b2_seg[0]);
      pre = heads[0];
    } else {
      heads[0] = head(p.w2_seg.row(0), p.b2_seg[0]);
      heads[1] = head(p.w2_seg.row(1), p.b2_seg[1]);
      pre = heads[0] * f.d / f.s + heads[1] * f.d;
    }
    trace.pre_clip[q] = pre;
    trace.durations[q] = pre > 0.0 ? pre : 0.0;
    total += trace.durations[q];
  }
  trace.total = total;
  return total;
}

double Predict(const ExampleFeatures& x, const Params& p) {
  ForwardTrace trace;
  return Forward(x, p, trace);
}

// --- gradients ------------------------------------------------------------------

Grads Grads::ShapedLike(const Params& p) {
  Grads g;
  for (int t = 0; t < kNumTables; ++t) {
    g.tables[t] = Tensor2(p.tables[t].rows, p.tables[t].cols);
    g.touched[t].assign(p.tables[t].rows, 0);
  }
  g.w1 = Tensor2(p.w1.rows, p.w1.cols);
  g.b1.assign(p.b1.size(), 0.0);
  g.w2_stop = Tensor2(p.w2_stop.rows, p.w2_stop.cols);
  g.b2_stop.assign(p.b2_stop.size(), 0.0);
  g.w2_seg = Tensor2(p.w2_seg.rows, p.w2_seg.cols);
  g.b2_seg.assign(p.b2_seg.size(), 0.0);
  return g;
}

void Grads::Clear() {
  for (int t = 0; t < kNumTables; ++t) {
    for (int32_t r : touched_rows[t]) {
      std::fill_n(tables[t].row(r), tables[t].cols, 0.0);
      touched[t][r] = 0;
    }
    touched_rows[t].clear();
  }
  std::fill(w1.data.begin(), w1.data.end(), 0.0);
  std::fill(b1.begin(), b1.end(), 0.0);
  std::fill(w2_stop.data.begin(), w2_stop.data.end(), 0.0);
  std::fill(b2_stop.begin(), b2_stop.end(), 0.0);
  std::fill(w2_seg.data.begin(), w2_seg.data.end(), 0.0);
  std::fill(b2_seg.begin(), b2_seg.end(), 0.0);
}

double* Grads::TouchRow(int table, int32_t row) {
  if (!touched[table][row]) {
    touched[table][row] = 1;
    touched_rows[table].push_back(row);
  }
  return tables[table].row(row);
}

void Grads::Add(const Grads& o) {
  for (int t = 0; t < kNumTables; ++t) {
    for (int32_t r : o.touched_rows[t]) {
      double* dst = TouchRow(t, r);
      const double* src = o.tables[t].row(r);
      for (int i = 0; i < tables[t].cols; ++i) dst[i] += src[i];
    }
  }
  const auto add = [](std::vector<double>& a, const std::vector<double>& b) {
    for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  };
  add(w1.data, o.w1.data);
  add(b1, o.b1);
  add(w2_stop.data, o.w2_stop.data);
  add(b2_stop, o.b2_stop);
  add(w2_seg.data, o.w2_seg.data);
  add(b2_seg, o.b2_seg);
}

bool Grads::AllFinite() const {
  const auto ok = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  for (int t = 0; t < kNumTables; ++t) {
    for (int32_t r : touched_rows[t]) {
      for (int i = 0; i < tables[t].cols; ++i) {
        if (!std::isfinite(tables[t].at(r, i))) return false;
      }
    }
  }
  return ok(w1.data) && ok(b1) && ok(w2_stop.data) && ok(b2_stop) && ok(w2_seg.data) &&
         ok(b2_seg);
}

void Backward(const ExampleFeatures& x, const Params& p, const ForwardTrace& trace,
              double d_loss_d_total, Grads& out) {
  const ModelConfig& cfg = p.config;
  const int k = cfg.hidden;
  const int in = cfg.input_dim();
  const int ds = cfg.d_spatial;
  const int cd = cfg.context_dim();
  const int nq = static_cast<int>(x.quanta.size());
  bool match = trace.num_quanta == nq &&
               trace.context_ids == std::array<int32_t, 3>{x.route, x.hour_slice, x.dow} &&
               static_cast<int>(trace.context.size()) == cd &&
               trace.inputs.size() == static_cast<size_t>(nq) * in &&
               out.w1.same_shape(p.w1);
  for (int q = 0; match && q < nq; ++q) match = trace.kinds[q] == x.quanta[q].kind;
  if (!match) throw Error(ErrorCode::kMismatch, "forward trace does not match example/params");
  if (d_loss_d_total == 0.0) return;

  std::vector<double> dz_sum(k, 0.0);
  std::vector<double> dz(k);
  std::vector<double> dl(ds);
  for (int q = 0; q < nq; ++q) {
    if (!(trace.pre_clip[q] > 0.0)) continue;
    const QuantumFeatures& f = x.quanta[q];
    const double du = d_loss_d_total;
    const double* z = trace.hidden_pre.data() + static_cast<size_t>(q) * k;
    const double* xin = trace.inputs.data() + static_cast<size_t>(q) * in;
    std::fill(dz.begin(), dz.end(), 0.0);
    const auto head_back = [&](const double* w, double* gw, double& gb, double dout) {
      gb += dout;
      for (int j = 0; j < k; ++j) {
        if (z[j] > 0.0) {
          gw[j] += dout * z[j];
          dz[j] += dout * w[j];
        }
      }
    };
    if (f.kind == QuantumKind::kStop) {
      head_back(p.w2_stop.row(0), out.w2_stop.row(0), out.b2_stop[0], du);
    } else if (cfg.generic_numeric_inputs) {
      head_back(p.w2_seg.row(0), out.w2_seg.row(0), out.b2_seg[0], du);
    } else {
      head_back(p.w2_seg.row(0), out.w2_seg.row(0), out.b2_seg[0], du * f.d / f.s);
      head_back(p.w2_seg.row(1), out.w2_seg.row(1), out.b2_seg[1], du * f.d);
    }
    // dz already excludes inactive hidden units.
    std::fill(dl.begin(), dl.end(), 0.0);
    for (int j = 0; j < k; ++j) {
      if (dz[j] == 0.0) continue;
      out.b1[j] += dz[j];
      dz_sum[j] += dz[j];
      double* gw = out.w1.row(j);
      const double* w = p.w1.row(j);
      for (int i = 0; i < ds; ++i) {
        gw[i] += dz[j] * xin[i];
        dl[i] += dz[j] * w[i];
      }
      if (cfg.generic_numeric_inputs) {
        gw[ds + cd] += dz[j] * xin[ds + cd];
        gw[ds + cd + 1] += dz[j] * xin[ds + cd + 1];
      }
    }
    for (int l = 0; l < kNumCellLevels; ++l) {
      if (!cfg.use_cells[l] || f.cells[l] == Vocab::kAbsent) continue;
      double* g = out.TouchRow(CellTable(l), f.cells[l]);
      for (int i = 0; i < ds; ++i) g[i] += dl[i];
    }
  }

  const double* c = trace.context.data();
  std::vector<double> dc(cd, 0.0);
  for (int j = 0; j < k; ++j) {
    if (dz_sum[j] == 0.0) continue;
    double* gw = out.w1.row(j) + ds;
    const double* w = p.w1.row(j) + ds;
    for (int i = 0; i < cd; ++i) {
      gw[i] += dz_sum[j] * c[i];
      dc[i] += dz_sum[j] * w[i];
    }
  }
  if (cfg.use_route && x.route != Vocab::kAbsent && cfg.d_route > 0) {
    double* g = out.TouchRow(kRouteTable, x.route);
    for (int i = 0; i < cfg.d_route; ++i) g[i] += dc[i];
  }
  if (cfg.use_time && x.hour_slice != kAbsentTime && cfg.d_hour > 0) {
    double* g = out.TouchRow(kHourTable, x.hour_slice);
    for (int i = 0; i < cfg.d_hour; ++i) g[i] += dc[cfg.d_route + i];
  }
  if (cfg.use_time && x.dow != kAbsentTime && cfg.d_dow > 0) {
    double* g = out.TouchRow(kDowTable, x.dow);
    for (int i = 0; i < cfg.d_dow; ++i) g[i] += dc[cfg.d_route + cfg.d_hour + i];
  }
}

// --- checkpoints ------------------------------------------------------------------

namespace {

nlohmann::ordered_json TensorJson(int rows, int cols, std::span<const double> data) {
  nlohmann::ordered_json j;
  j["rows"] = rows;
  j["cols"] = cols;
  j["data"] = std::vector<double>(data.begin(), data.end());
  return j;
}

Tensor2 TensorFromJson(const nlohmann::json& j) {
  Tensor2 t(j.at("rows").get<int>(), j.at("cols").get<int>());
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != t.data.size()) throw Error(ErrorCode::kParse, "tensor size mismatch");
  t.data = std::move(data);
  return t;
}

nlohmann::ordered_json ConfigJson(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["d_route"] = c.d_route;
  j["d_hour"] = c.d_hour;
  j["d_dow"] = c.d_dow;
  j["d_spatial"] = c.d_spatial;
  j["hidden"] = c.hidden;
  j["generic_numeric_inputs"] = c.generic_numeric_inputs;
  j["use_route"] = c.use_route;
  j["use_time"] = c.use_time;
  j["use_cells"] = c.use_cells;
  j["init_stddev"] = c.init_stddev;
  return j;
}

ModelConfig ConfigFromJson(const nlohmann::json& j) {
  ModelConfig c;
  c.d_route = j.at("d_route").get<int>();
  c.d_hour = j.at("d_hour").get<int>();
  c.d_dow = j.at("d_dow").get<int>();
  c.d_spatial = j.at("d_spatial").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.generic_numeric_inputs = j.at("generic_numeric_inputs").get<bool>();
  c.use_route = j.at("use_route").get<bool>();
  c.use_time = j.at("use_time").get<bool>();
  c.use_cells = j.at("use_cells").get<std::array<bool, kNumCellLevels>>();
  c.init_stddev = j.at("init_stddev").get<double>();
  c.Validate();
  return c;
}

}  // namespace

std::array<uint64_t, 1 + kNumCellLevels> VocabHashes(const Vocabs& vocabs) {
  std::array<uint64_t, 1 + kNumCellLevels> h{};
  h[0] = vocabs.route.Hash();
  for (int l = 0; l < kNumCellLevels; ++l) h[1 + l] = vocabs.cells[l].Hash();
  return h;
}

void Checkpoint::Write(std::ostream& out) const {
  nlohmann::ordered_json j;
  j["format"] = "bustr-checkpoint";
  j["version"] = kCheckpointVersion;
  j["config"] = ConfigJson(params.config);
  nlohmann::ordered_json fo;
  fo["use_route"] = features.use_route;
  fo["use_time"] = features.use_time;
  fo["use_cells"] = features.use_cells;
  if (features.constant_speed_mps) {
    fo["constant_speed_mps"] = *features.constant_speed_mps;
  } else {
    fo["constant_speed_mps"] = nullptr;
  }
  j["features"] = fo;
  std::vector<std::string> hashes;
  for (uint64_t h : vocab_hashes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    hashes.emplace_back(buf);
  }
  j["vocab_hashes"] = hashes;
  j["metadata"] = metadata;
  auto& tensors = j["tensors"];
  for (int t = 0; t < kNumTables; ++t) {
    const Tensor2& tab = params.tables[t];
    tensors[TableName(t)] = TensorJson(tab.rows, tab.cols, tab.data);
  }
  tensors["w1"] = TensorJson(params.w1.rows, params.w1.cols, params.w1.data);
  tensors["b1"] = TensorJson(1, static_cast<int>(params.b1.size()), params.b1);
  tensors["w2_stop"] = TensorJson(params.w2_stop.rows, params.w2_stop.cols, params.w2_stop.data);
  tensors["b2_stop"] = TensorJson(1, static_cast<int>(params.b2_stop.size()), params.b2_stop);
  tensors["w2_seg"] = TensorJson(params.w2_seg.rows, params.w2_seg.cols, params.w2_seg.data);
  tensors["b2_seg"] = TensorJson(1, static_cast<int>(params.b2_seg.size()), params.b2_seg);
  out << j.dump(1) << '\n';
}

Checkpoint Checkpoint::Read(std::istream& in) {
  Checkpoint ck;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format").get<std::string>() != "bustr-checkpoint") {
      throw Error(ErrorCode::kParse, "not a checkpoint file");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw Error(ErrorCode::kParse, "unsupported checkpoint version");
    }
    ck.params.config = ConfigFromJson(j.at("config"));
    const auto& fo = j.at("features");
    ck.features.use_route = fo.at("use_route").get<bool>();
    ck.features.use_time = fo.at("use_time").get<bool>();
    ck.features.use_cells = fo.at("use_cells").get<std::array<bool, kNumCellLevels>>();
    if (!fo.at("constant_speed_mps").is_null()) {
      ck.features.constant_speed_mps = fo.at("constant_speed_mps").get<double>();
    }
    const auto hashes = j.at("vocab_hashes").get<std::vector<std::string>>();
    if (hashes.size() != ck.vocab_hashes.size()) throw Error(ErrorCode::kParse, "vocab hash count");
    for (size_t i = 0; i < hashes.size(); ++i) {
      ck.vocab_hashes[i] = std::stoull(hashes[i], nullptr, 16);
    }
    ck.metadata = j.at("metadata");
    const auto& t = j.at("tensors");
    for (int tb = 0; tb < kNumTables; ++tb) ck.params.tables[tb] = TensorFromJson(t.at(TableName(tb)));
    ck.params.w1 = TensorFromJson(t.at("w1"));
    ck.params.b1 = TensorFromJson(t.at("b1")).data;
    ck.params.w2_stop = TensorFromJson(t.at("w2_stop"));
    ck.params.b2_stop = TensorFromJson(t.at("b2_stop")).data;
    ck.params.w2_seg = TensorFromJson(t.at("w2_seg"));
    ck.params.b2_seg = TensorFromJson(t.at("b2_seg")).data;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("checkpoint: ") + e.what());
  }
  const ModelConfig& c = ck.params.config;
  const int seg_out = c.generic_numeric_inputs ? 1 : 2;
  if (ck.params.w1.rows != c.hidden || ck.params.w1.cols != c.input_dim() ||
      ck.params.w2_seg.rows != seg_out || ck.params.w2_seg.cols != c.hidden ||
      ck.params.w2_stop.cols != c.hidden ||
      static_cast<int>(ck.params.b1.size()) != c.hidden ||
      static_cast<int>(ck.params.b2_seg.size()) != seg_out) {
    throw Error(ErrorCode::kParse, "checkpoint tensor shapes disagree with config");
  }
  return ck;
}

void Checkpoint::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  Write(out);
}

Checkpoint Checkpoint::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return Read(in);
}

void Checkpoint::CheckVocabs(const Vocabs& vocabs) const {
  if (VocabHashes(vocabs) != vocab_hashes) {
    throw Error(ErrorCode::kMismatch, "checkpoint/vocab hash mismatch");
  }
  if (params.tables[kRouteTable].rows != static_cast<int>(vocabs.route.size())) {
    throw Error(ErrorCode::kMismatch, "route table size disagrees with vocab");
  }
  for (int l = 0; l < kNumCellLevels; ++l) {
    if (params.tables[CellTable(l)].rows != static_cast<int>(vocabs.cells[l].size())) {
      throw Error(ErrorCode::kMismatch, "cell table size disagrees with vocab");
    }
  }
}

}  // namespace bustr
