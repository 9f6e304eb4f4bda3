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

// Adam training with MSE loss, periodic validation, best-MAPE checkpoint
// selection and two-pass L1 feature selection.

#ifndef BUSTR_TRAINER_H_
#define BUSTR_TRAINER_H_

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "bustr/featurizer.h"
#include "bustr/model.h"

namespace bustr {

struct TrainConfig {
  int64_t steps = 100000;
  int batch = 200;
  double learning_rate = 0.1;
  double decay = 0.97;
  int64_t decay_every = 1000;
  int64_t eval_every = 500;
  int64_t eval_samples = 100000;
  double reg_weight = 0.1;   // weight of the embedding L1 penalty
  double reg_base = 1.25;    // per-level factor base^L
  double select_eps = 0.1;   // row L2 norm threshold for feature selection
  bool feature_selection = true;
  bool use_sia = true;
  AblationPolicy sia;
  ModelConfig model;
  uint64_t seed = 1;
  int threads = 1;

  void Validate() const;
};

// lr(n) = learning_rate * decay^floor(n / decay_every).
double LearningRate(const TrainConfig& config, int64_t step);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam on one flat block; t is the 1-based step count.
void AdamUpdate(std::span<double> param, std::span<const double> grad, std::span<double> m,
                std::span<double> v, int64_t t, double lr, const AdamConfig& config = {});

struct AdamState {
  std::array<Tensor2, kNumTables> m_tables;
  std::array<Tensor2, kNumTables> v_tables;
  std::vector<std::vector<double>> m_dense;  // in ForEachDense order
  std::vector<std::vector<double>> v_dense;
  int64_t step = 0;

  static AdamState ShapedLike(const Params& p);
};

// One Adam step. Dense tensors always update; embedding rows update only if
// the gradient touched them. Error(kNumerical) on a non-finite gradient.
void AdamStep(Params& p, const Grads& g, AdamState& state, double lr,
              const AdamConfig& config = {});

// Sum over enabled cell levels L of weight * base^L * mean over non-ABSENT
// rows of the row L1 norm.
double RegularizerLoss(const Params& p, const TrainConfig& config);
// Adds the (sub)gradient of RegularizerLoss; sign(0) = 0. Touches every row.
void AddRegularizerGrad(const Params& p, const TrainConfig& config, Grads& g);

struct CurvePoint {
  int64_t step = 0;
  double train_loss = 0.0;  // mean batch loss since the previous evaluation
  double val_mape = 0.0;
};

struct PassData {
  std::span<const ExampleFeatures> train;
  std::span<const ExampleFeatures> validation;
  TableSizes sizes;
};

struct PassResult {
  Params best;
  double best_mape = 0.0;
  int64_t best_step = 0;
  std::vector<CurvePoint> curve;
};

using ProgressFn = std::function<void(int pass, const CurvePoint&)>;

// Error(kInvalidArgument) on an empty split, Error(kNumerical) on a
// non-finite loss or gradient.
PassResult TrainPass(const PassData& data, const TrainConfig& config, bool regularize,
                     int pass = 1, const ProgressFn& progress = nullptr);

// Keeps cell tokens whose embedding row has L2 norm above eps. The route
// vocabulary is kept whole.
Vocabs SelectFeatures(const Params& p, const Vocabs& vocabs, double eps);

struct TrainInputs {
  std::span<const QuantizedShingle> train;
  std::span<const QuantizedShingle> validation;
  const TrafficTable* traffic = nullptr;
  TimeZone timezone;
  FeatureOptions features;
};

struct TrainReport {
  std::vector<CurvePoint> pass1;
  std::vector<CurvePoint> pass2;
  std::array<size_t, kNumCellLevels> cells_before{};  // non-ABSENT rows
  std::array<size_t, kNumCellLevels> cells_after{};
  double best_mape = 0.0;
  int64_t best_step = 0;
};

struct TrainedModel {
  Vocabs vocabs;
  Params params;
  FeatureOptions features;
  TrainReport report;

  Checkpoint ToCheckpoint() const;
};

// Pass 1 with the regularizer, feature selection, then pass 2 from scratch on
// the selected vocabularies with the same seed. Without feature selection a
// single unregularized pass runs.
TrainedModel TrainFull(const TrainInputs& inputs, const TrainConfig& config,
                       const ProgressFn& progress = nullptr);

std::vector<ExampleFeatures> FeaturizeAll(const Featurizer& featurizer,
                                          std::span<const QuantizedShingle> items);

// CSV: pass,step,train_loss,val_mape.
void WriteTrainReportCsv(std::ostream& out, const TrainReport& report);

}  // namespace bustr

#endif  // BUSTR_TRAINER_H_
