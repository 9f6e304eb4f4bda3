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

// The travel-time network.
//
// Every quantum q (stop or road segment) of an interval runs through the same
// hidden layer:
//
//   l_q = E_15[c15] + E_12.5[c12.5] + E_4.5[c4.5]       (unweighted sum)
//   c   = [E_route[r]; E_hour[h]; E_dow[w]]             (per example)
//   h_q = ReLU(W1 [l_q; c] + b1)
//
// and then through a head chosen by kind:
//
//   stop:     t_q = ReLU(w_stop . h_q + b_stop)
//   segment:  (a_q, b_q) = W_seg h_q + b_seg
//             t_q = ReLU(a_q d_q / s_q + b_q d_q)
//
// The prediction is T = sum_q t_q. Units: d in metres, s in m/s, t and T in
// seconds, a dimensionless, b in s/m.
//
// Row 0 of the route and cell tables is ABSENT: it is never read as anything
// but zero and never receives gradient. Time indices use -1 for ABSENT.

#ifndef BUSTR_MODEL_H_
#define BUSTR_MODEL_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bustr/featurizer.h"
#include "bustr/rng.h"

namespace bustr {

struct ModelConfig {
  int d_route = 2;
  int d_hour = 2;
  int d_dow = 2;
  int d_spatial = 4;
  int hidden = 32;
  // Ablation variant: feeds scaled d and d/s into the hidden layer and
  // replaces the segment mixture with a single direct output.
  bool generic_numeric_inputs = false;
  // Tables the forward pass reads. A disabled table is never touched.
  bool use_route = true;
  bool use_time = true;
  std::array<bool, kNumCellLevels> use_cells{true, true, true};
  double init_stddev = 0.1;

  int context_dim() const { return d_route + d_hour + d_dow; }
  int input_dim() const {
    return d_spatial + context_dim() + (generic_numeric_inputs ? 2 : 0);
  }
  void Validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Scales for the generic-numeric variant's extra hidden inputs.
inline constexpr double kGenericDistanceScaleM = 100.0;
inline constexpr double kGenericCarTimeScaleS = 10.0;

enum TableId : int {
  kRouteTable = 0,
  kHourTable = 1,
  kDowTable = 2,
  kCellTable15 = 3,
  kCellTable12_5 = 4,
  kCellTable4_5 = 5,
  kNumTables = 6,
};

inline constexpr TableId CellTable(int level) { return static_cast<TableId>(kCellTable15 + level); }
// Whether row 0 of the table is the reserved ABSENT row.
inline constexpr bool HasAbsentRow(int table) {
  return table != kHourTable && table != kDowTable;
}
const char* TableName(int table);

// Row-major dense matrix.
struct Tensor2 {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
  friend bool operator==(const Tensor2&, const Tensor2&) = default;
};

struct Params {
  ModelConfig config;
  std::array<Tensor2, kNumTables> tables;
  Tensor2 w1;                  // hidden x input_dim
  std::vector<double> b1;      // hidden
  Tensor2 w2_stop;             // 1 x hidden
  std::vector<double> b2_stop; // 1
  Tensor2 w2_seg;              // 2 x hidden (1 x hidden for the generic variant)
  std::vector<double> b2_seg;

  // Visits every dense tensor (W1, b1, heads) as (name, values).
  template <typename F>
  void ForEachDense(F&& f);
  template <typename F>
  void ForEachDense(F&& f) const;

  bool AllFinite() const;
  friend bool operator==(const Params&, const Params&) = default;
};

struct TableSizes {
  size_t route = 1;
  std::array<size_t, kNumCellLevels> cells{1, 1, 1};
  static TableSizes Of(const Vocabs& v);
};

// Hour rows start on the unit circle in dims 0-1; everything else learnable is
// N(0, init_stddev^2); ABSENT rows are zero.
Params InitParams(const ModelConfig& config, const TableSizes& sizes, Rng& rng);

struct ForwardTrace {
  int num_quanta = 0;
  std::vector<QuantumKind> kinds;
  std::array<int32_t, 3> context_ids{};  // route, hour, dow
  std::vector<double> context;   // context_dim
  std::vector<double> inputs;    // num_quanta x input_dim ([l; c; generic])
  std::vector<double> hidden_pre;  // num_quanta x hidden
  std::vector<double> heads;     // num_quanta x 2 (alpha/beta, or stop/direct in [0])
  std::vector<double> pre_clip;  // num_quanta
  std::vector<double> durations; // num_quanta, clipped
  double total = 0.0;
};

// Throws Error(kInvalidArgument) for any index outside its table.
double Forward(const ExampleFeatures& x, const Params& p, ForwardTrace& trace);
double Predict(const ExampleFeatures& x, const Params& p);

// Gradients, shaped like Params. Embedding tables are sparse: only rows
// flagged in `touched` carry values.
struct Grads {
  std::array<Tensor2, kNumTables> tables;
  std::array<std::vector<uint8_t>, kNumTables> touched;
  std::array<std::vector<int32_t>, kNumTables> touched_rows;
  Tensor2 w1;
  std::vector<double> b1;
  Tensor2 w2_stop;
  std::vector<double> b2_stop;
  Tensor2 w2_seg;
  std::vector<double> b2_seg;

  static Grads ShapedLike(const Params& p);
  // Zeroes dense parts and the touched rows only.
  void Clear();
  double* TouchRow(int table, int32_t row);
  // this += other (shapes must match).
  void Add(const Grads& other);
  bool AllFinite() const;
};

// Accumulates dL/dparams into `out` given dL/dT. Clipped units (pre-clip
// value <= 0) and hidden units with pre-activation <= 0 pass no gradient.
// Throws Error(kMismatch) if `trace` did not come from Forward(x, p).
void Backward(const ExampleFeatures& x, const Params& p, const ForwardTrace& trace,
              double d_loss_d_total, Grads& out);

// Checkpoint container: JSON with format/version, model config, feature
// options, vocabulary hashes and every tensor. Doubles are written in
// shortest round-trip form, so a reload is bit-exact.
struct Checkpoint {
  Params params;
  FeatureOptions features;
  std::array<uint64_t, 1 + kNumCellLevels> vocab_hashes{};  // route, 15, 12.5, 4.5
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  void Write(std::ostream& out) const;
  static Checkpoint Read(std::istream& in);
  void Save(const std::filesystem::path& path) const;
  static Checkpoint Load(const std::filesystem::path& path);
  // Error(kMismatch) unless the hashes match `vocabs`.
  void CheckVocabs(const Vocabs& vocabs) const;
};

std::array<uint64_t, 1 + kNumCellLevels> VocabHashes(const Vocabs& vocabs);

// --- template definitions -----------------------------------------------------

template <typename F>
void Params::ForEachDense(F&& f) {
  f("w1", std::span<double>(w1.data));
  f("b1", std::span<double>(b1));
  f("w2_stop", std::span<double>(w2_stop.data));
  f("b2_stop", std::span<double>(b2_stop));
  f("w2_seg", std::span<double>(w2_seg.data));
  f("b2_seg", std::span<double>(b2_seg));
}

template <typename F>
void Params::ForEachDense(F&& f) const {
  f("w1", std::span<const double>(w1.data));
  f("b1", std::span<const double>(b1));
  f("w2_stop", std::span<const double>(w2_stop.data));
  f("b2_stop", std::span<const double>(b2_stop));
  f("w2_seg", std::span<const double>(w2_seg.data));
  f("b2_seg", std::span<const double>(b2_seg));
}

}  // namespace bustr

#endif  // BUSTR_MODEL_H_
