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

#include "bustr/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <thread>

#include "bustr/error.h"
#include "bustr/metrics.h"

namespace bustr {
namespace {

// Gradient accumulation is split into a fixed number of chunks so the
// floating-point reduction order does not depend on the thread count.
constexpr int kGradChunks = 8;

template <typename F>
void ParallelFor(int n, int threads, F&& f) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int i = t; i < n; i += threads) f(i);
    });
  }
  for (auto& th : pool) th.join();
}

std::vector<double> PredictAll(std::span<const ExampleFeatures> xs,
                               std::span<const size_t> idx, const Params& p, int threads) {
  std::vector<double> out(idx.size());
  const int n = static_cast<int>(idx.size());
  const int chunks = std::min(n, 64);
  ParallelFor(chunks, threads, [&](int c) {
    const int lo = static_cast<int>(static_cast<int64_t>(n) * c / chunks);
    const int hi = static_cast<int>(static_cast<int64_t>(n) * (c + 1) / chunks);
    ForwardTrace trace;
    for (int i = lo; i < hi; ++i) out[i] = Forward(xs[idx[i]], p, trace);
  });
  return out;
}

size_t CountRows(const Vocab& v) { return v.size() - 1; }

}  // namespace

void TrainConfig::Validate() const {
  if (steps <= 0 || batch <= 0 || eval_every <= 0 || eval_samples <= 0 || decay_every <= 0 ||
      threads <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "train counts must be positive");
  }
  if (!(learning_rate > 0.0) || !(decay > 0.0) || !(reg_base > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "learning rate, decay and base must be positive");
  }
  if (!(reg_weight >= 0.0) || !(select_eps >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "regularizer weight and eps must be >= 0");
  }
  sia.Validate();
  model.Validate();
}

double LearningRate(const TrainConfig& config, int64_t step) {
  return config.learning_rate *
         std::pow(config.decay, static_cast<double>(step / config.decay_every));
}

void AdamUpdate(std::span<double> param, std::span<const double> grad, std::span<double> m,
                std::span<double> v, int64_t t, double lr, const AdamConfig& c) {
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (size_t i = 0; i < param.size(); ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

AdamState AdamState::ShapedLike(const Params& p) {
  AdamState s;
  for (int t = 0; t < kNumTables; ++t) {
    s.m_tables[t] = Tensor2(p.tables[t].rows, p.tables[t].cols);
    s.v_tables[t] = Tensor2(p.tables[t].rows, p.tables[t].cols);
  }
  p.ForEachDense([&](const char*, std::span<const double> v) {
    s.m_dense.emplace_back(v.size(), 0.0);
    s.v_dense.emplace_back(v.size(), 0.0);
  });
  return s;
}

void AdamStep(Params& p, const Grads& g, AdamState& state, double lr, const AdamConfig& config) {
  if (!g.AllFinite()) {
    throw Error(ErrorCode::kNumerical,
                "non-finite gradient at step " + std::to_string(state.step + 1));
  }
  const int64_t t = ++state.step;
  for (int tb = 0; tb < kNumTables; ++tb) {
    Tensor2& tab = p.tables[tb];
    const size_t cols = tab.cols;
    for (int32_t r : g.touched_rows[tb]) {
      if (HasAbsentRow(tb) && r == 0) continue;
      AdamUpdate({tab.row(r), cols}, {g.tables[tb].row(r), cols},
                 {state.m_tables[tb].row(r), cols}, {state.v_tables[tb].row(r), cols}, t, lr,
                 config);
    }
  }
  const std::array<std::span<const double>, 6> dense = {g.w1.data, g.b1, g.w2_stop.data,
                                                        g.b2_stop, g.w2_seg.data, g.b2_seg};
  size_t k = 0;
  p.ForEachDense([&](const char*, std::span<double> v) {
    AdamUpdate(v, dense[k], state.m_dense[k], state.v_dense[k], t, lr, config);
    ++k;
  });
}

double RegularizerLoss(const Params& p, const TrainConfig& config) {
  double loss = 0.0;
  for (int l = 0; l < kNumCellLevels; ++l) {
    if (!p.config.use_cells[l]) continue;
    const Tensor2& tab = p.tables[CellTable(l)];
    if (tab.rows <= 1) continue;
    double sum = 0.0;
    for (int r = 1; r < tab.rows; ++r) {
      for (int i = 0; i < tab.cols; ++i) sum += std::fabs(tab.at(r, i));
    }
    loss += config.reg_weight * std::pow(config.reg_base, kCellLevelValues[l]) * sum /
            (tab.rows - 1);
  }
  return loss;
}

void AddRegularizerGrad(const Params& p, const TrainConfig& config, Grads& g) {
  for (int l = 0; l < kNumCellLevels; ++l) {
    if (!p.config.use_cells[l]) continue;
    const int tb = CellTable(l);
    const Tensor2& tab = p.tables[tb];
    if (tab.rows <= 1) continue;
    const double coef =
        config.reg_weight * std::pow(config.reg_base, kCellLevelValues[l]) / (tab.rows - 1);
    for (int r = 1; r < tab.rows; ++r) {
      double* gr = g.TouchRow(tb, r);
      const double* e = tab.row(r);
      for (int i = 0; i < tab.cols; ++i) gr[i] += coef * ((e[i] > 0.0) - (e[i] < 0.0));
    }
  }
}

PassResult TrainPass(const PassData& data, const TrainConfig& config, bool regularize, int pass,
                     const ProgressFn& progress) {
  config.Validate();
  if (data.train.empty()) throw Error(ErrorCode::kInvalidArgument, "empty training split");
  if (data.validation.empty()) throw Error(ErrorCode::kInvalidArgument, "empty validation split");
  regularize = regularize && config.reg_weight > 0.0;

  Rng init_rng(DeriveSeed(config.seed, "init"));
  Rng batch_rng(DeriveSeed(config.seed, "batch"));
  Rng sia_rng(DeriveSeed(config.seed, "sia"));
  Params params = InitParams(config.model, data.sizes, init_rng);
  AdamState adam = AdamState::ShapedLike(params);

  // Fixed validation subset, sampled without replacement.
  std::vector<size_t> val_idx(data.validation.size());
  std::iota(val_idx.begin(), val_idx.end(), size_t{0});
  if (static_cast<int64_t>(val_idx.size()) > config.eval_samples) {
    Rng eval_rng(DeriveSeed(config.seed, "eval"));
    for (size_t i = 0; i < static_cast<size_t>(config.eval_samples); ++i) {
      std::swap(val_idx[i], val_idx[i + eval_rng.Below(val_idx.size() - i)]);
    }
    val_idx.resize(config.eval_samples);
    std::sort(val_idx.begin(), val_idx.end());
  }
  std::vector<double> val_actual;
  for (size_t i : val_idx) val_actual.push_back(data.validation[i].target_s);

  std::vector<Grads> chunk_grads;
  for (int c = 0; c < kGradChunks; ++c) chunk_grads.push_back(Grads::ShapedLike(params));
  std::vector<double> chunk_loss(kGradChunks);
  std::vector<ExampleFeatures> batch(config.batch);
  const double dscale = 2.0 / config.batch;

  PassResult result;
  result.best_mape = std::numeric_limits<double>::infinity();
  double loss_acc = 0.0;
  int64_t loss_n = 0;
  for (int64_t step = 1; step <= config.steps; ++step) {
    for (int b = 0; b < config.batch; ++b) {
      const ExampleFeatures& x = data.train[batch_rng.Below(data.train.size())];
      if (config.use_sia) {
        batch[b] = x;
        ApplySiaOutcome(batch[b], DrawSia(sia_rng, config.sia));
      } else {
        batch[b] = x;
      }
    }
    ParallelFor(kGradChunks, config.threads, [&](int c) {
      Grads& g = chunk_grads[c];
      g.Clear();
      double loss = 0.0;
      ForwardTrace trace;
      const int lo = config.batch * c / kGradChunks;
      const int hi = config.batch * (c + 1) / kGradChunks;
      for (int b = lo; b < hi; ++b) {
        const double pred = Forward(batch[b], params, trace);
        const double err = pred - batch[b].target_s;
        loss += err * err;
        Backward(batch[b], params, trace, dscale * err, g);
      }
      chunk_loss[c] = loss;
    });
    Grads& total = chunk_grads[0];
    double loss = chunk_loss[0];
    for (int c = 1; c < kGradChunks; ++c) {
      total.Add(chunk_grads[c]);
      loss += chunk_loss[c];
    }
    loss /= config.batch;
    if (regularize) {
      loss += RegularizerLoss(params, config);
      AddRegularizerGrad(params, config, total);
    }
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::kNumerical, "non-finite loss at step " + std::to_string(step));
    }
    AdamStep(params, total, adam, LearningRate(config, step - 1));
    loss_acc += loss;
    ++loss_n;

    if (step % config.eval_every == 0 || step == config.steps) {
      const auto preds = PredictAll(data.validation, val_idx, params, config.threads);
      CurvePoint pt{step, loss_acc / loss_n, Mape(preds, val_actual)};
      loss_acc = 0.0;
      loss_n = 0;
      result.curve.push_back(pt);
      if (progress) progress(pass, pt);
      if (pt.val_mape < result.best_mape) {
        result.best_mape = pt.val_mape;
        result.best_step = step;
        result.best = params;
      }
    }
  }
  if (!std::isfinite(result.best_mape)) {
    throw Error(ErrorCode::kNumerical, "validation MAPE never finite");
  }
  return result;
}

Vocabs SelectFeatures(const Params& p, const Vocabs& vocabs, double eps) {
  Vocabs out;
  out.route = vocabs.route;
  for (int l = 0; l < kNumCellLevels; ++l) {
    const Tensor2& tab = p.tables[CellTable(l)];
    const Vocab& v = vocabs.cells[l];
    if (tab.rows != static_cast<int>(v.size())) {
      throw Error(ErrorCode::kMismatch, "cell table size disagrees with vocab");
    }
    std::vector<std::string> kept;
    for (int r = 1; r < tab.rows; ++r) {
      double sq = 0.0;
      for (int i = 0; i < tab.cols; ++i) sq += tab.at(r, i) * tab.at(r, i);
      if (std::sqrt(sq) > eps) kept.push_back(v.Token(r));
    }
    out.cells[l] = Vocab::Build(v.name(), std::move(kept));
  }
  return out;
}

std::vector<ExampleFeatures> FeaturizeAll(const Featurizer& featurizer,
                                          std::span<const QuantizedShingle> items) {
  std::vector<ExampleFeatures> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(featurizer.Featurize(it));
  return out;
}

TrainedModel TrainFull(const TrainInputs& inputs, const TrainConfig& config,
                       const ProgressFn& progress) {
  config.Validate();
  TrainConfig cfg = config;
  cfg.model.use_route = inputs.features.use_route;
  cfg.model.use_time = inputs.features.use_time;
  cfg.model.use_cells = inputs.features.use_cells;

  TrainedModel out;
  out.features = inputs.features;
  out.vocabs = BuildVocabs(inputs.train);
  for (int l = 0; l < kNumCellLevels; ++l) {
    out.report.cells_before[l] = CountRows(out.vocabs.cells[l]);
  }

  const auto run = [&](const Vocabs& vocabs, bool regularize, int pass) {
    const Featurizer fz(vocabs, inputs.traffic, inputs.timezone, inputs.features);
    const auto train = FeaturizeAll(fz, inputs.train);
    const auto val = FeaturizeAll(fz, inputs.validation);
    return TrainPass({train, val, TableSizes::Of(vocabs)}, cfg, regularize, pass, progress);
  };

  PassResult final_pass;
  if (cfg.feature_selection) {
    PassResult first = run(out.vocabs, true, 1);
    out.report.pass1 = std::move(first.curve);
    out.vocabs = SelectFeatures(first.best, out.vocabs, cfg.select_eps);
    final_pass = run(out.vocabs, false, 2);
    out.report.pass2 = final_pass.curve;
  } else {
    final_pass = run(out.vocabs, false, 1);
    out.report.pass1 = final_pass.curve;
  }
  for (int l = 0; l < kNumCellLevels; ++l) {
    out.report.cells_after[l] = CountRows(out.vocabs.cells[l]);
  }
  out.params = std::move(final_pass.best);
  out.report.best_mape = final_pass.best_mape;
  out.report.best_step = final_pass.best_step;
  return out;
}

Checkpoint TrainedModel::ToCheckpoint() const {
  Checkpoint ck;
  ck.params = params;
  ck.features = features;
  ck.vocab_hashes = VocabHashes(vocabs);
  ck.metadata["best_step"] = report.best_step;
  ck.metadata["best_val_mape"] = report.best_mape;
  ck.metadata["cells_before"] = report.cells_before;
  ck.metadata["cells_after"] = report.cells_after;
  return ck;
}

void WriteTrainReportCsv(std::ostream& out, const TrainReport& report) {
  out << "pass,step,train_loss,val_mape\n";
  const auto dump = [&](int pass, const std::vector<CurvePoint>& curve) {
    for (const auto& pt : curve) {
      out << pass << ',' << pt.step << ',' << nlohmann::json(pt.train_loss).dump() << ','
          << nlohmann::json(pt.val_mape).dump() << '\n';
    }
  };
  dump(1, report.pass1);
  dump(2, report.pass2);
}

}  // namespace bustr
