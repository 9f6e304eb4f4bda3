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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.
//
//   acceptance [work_dir]
//
// Synthetic worlds are generated under work_dir (a fresh temp dir by
// default) and reused if already present.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "bustr/baselines_eval.h"
#include "bustr/error.h"
#include "bustr/pipeline.h"
#include "bustr/synthworld.h"
#include "bustr/trainer.h"
#include "oracles.h"
#include "test_util.h"

namespace bustr {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

double Seconds() {
  using Clock = std::chrono::steady_clock;
  static const Clock::time_point start = Clock::now();
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void Log(const std::string& line) { std::fprintf(stderr, "[%7.1fs] %s\n", Seconds(), line.c_str()); }

// --- worlds ---------------------------------------------------------------------

struct WorldData {
  WorldSpec spec;
  Corpus corpus;
  SplitShingles split;
  EvalData View() const {
    return {split.train, split.validation, split.test, &corpus.traffic, TimeZone(corpus.network.timezone)};
  }
};

PipelineConfig ConfigFor(const WorldSpec& spec, const fs::path& root) {
  const WorldPaths paths = WorldPaths::In(root);
  PipelineConfig cfg;
  cfg.gtfs_dir = paths.gtfs;
  cfg.vehicle_positions = paths.vehicle_positions;
  cfg.traffic = paths.traffic;
  cfg.feed_id = spec.feed_id;
  cfg.traffic_bucket_minutes = spec.traffic_bucket_min;
  return cfg;
}

fs::path EnsureWorld(const fs::path& work, const std::string& preset) {
  const fs::path root = work / preset;
  if (!fs::exists(root / "world.json")) {
    Log("generating world " + preset);
    GenerateWorld(PresetWorld(preset, 1), root);
  }
  return root;
}

WorldData LoadWorldData(const fs::path& work, const std::string& preset) {
  WorldData d;
  d.spec = PresetWorld(preset, 1);
  const PipelineConfig cfg = ConfigFor(d.spec, EnsureWorld(work, preset));
  d.corpus = LoadCorpus(cfg);
  d.split = SplitItems(BuildShingles(d.corpus.network, d.corpus.traces, cfg.shingler, 1), {});
  Log(Fmt("%s: train %zu validation %zu test %zu", preset.c_str(), d.split.train.size(),
          d.split.validation.size(), d.split.test.size()));
  return d;
}

// Default hyperparameters with the run shortened to 10K steps and the
// learning-rate decay interval scaled to match.
TrainConfig TenKSteps() {
  TrainConfig c;
  c.steps = 10000;
  c.decay_every = c.steps / 100;
  return c;
}

AblationResult Run(Variant v, const EvalData& data, const TrainConfig& tc) {
  Log(std::string("training ") + VariantName(v));
  AblationResult r = AblationRun(v, data, tc, 1);
  for (const auto& rep : r.reports) {
    Log(Fmt("  %s %s n=%zu mape=%.4f", VariantName(v), rep.slice.c_str(), rep.n, rep.mean));
  }
  return r;
}

double SliceMape(const AblationResult& r, const std::string& slice) {
  for (const auto& rep : r.reports) {
    if (rep.slice == slice) return rep.mean;
  }
  throw Error(ErrorCode::kNotFound, "slice " + slice);
}

// --- criteria -------------------------------------------------------------------

Outcome GradientCheck() {
  TableSizes sizes;
  sizes.route = 6;
  sizes.cells = {9, 7, 5};
  ModelConfig mc;
  mc.hidden = 4;
  mc.d_spatial = 2;
  mc.init_stddev = 0.5;
  Rng rng(101);
  oracles::FdStats total;
  double worst = -1.0;
  const int instances = 120;
  for (int i = 0; i < instances; ++i) {
    Params p = InitParams(mc, sizes, rng);
    const ExampleFeatures x = oracles::RandomExample(rng, sizes, 1 + static_cast<int>(rng.Below(5)));
    const oracles::FdStats s = oracles::CheckGradientsFd(x, p, 1e-5, 1e-4, 1e-7);
    total.checked += s.checked;
    total.skipped += s.skipped;
    total.failed += s.failed;
    worst = std::max(worst, s.worst_excess);
  }
  return {total.failed == 0 && total.checked > 0,
          Fmt("%d instances, %d scalars checked, %d at a kink skipped, %d outside tolerance", instances,
              total.checked, total.skipped, total.failed)};
}

Outcome ShingleCheck() {
  Rng rng(202);
  const ShinglerConfig cfg;
  int exhaustive = 0, bad = 0;
  std::string first;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.Below(trial % 2 ? 9 : 60));
    const auto rt = oracles::MakeRandomTrace(rng, n);
    Rng draw_rng(trial);
    Rng replay(trial);
    const double draw = replay.Uniform(cfg.min_len_lo_m, cfg.min_len_hi_m);
    const auto got = ExtractShingles(rt.trace, rt.route, cfg, draw_rng);
    const bool full = n <= 10;
    exhaustive += full;
    const auto problems = oracles::CheckShingles(rt, cfg, draw, got, full);
    if (!problems.empty() && bad++ == 0) first = problems.front();
  }
  return {bad == 0, Fmt("1000 traces, %d checked exhaustively, %d with violations%s%s", exhaustive, bad,
                        bad ? ": " : "", first.c_str())};
}

struct RecoveryResults {
  BaselineReport baselines;
  double full = 0.0;
  double traffic_ablated = 0.0;
};

Outcome RecoveryCheck(const RecoveryResults& r) {
  const double car = r.baselines.car_mape, lin = r.baselines.linear_mape, full = r.full;
  const bool pass = full < 8.0 && car >= 1.5 * full && lin > full && lin < car;
  return {pass, Fmt("test MAPE full %.3f%%, linear %.3f%%, car %.3f%% (car/full %.2f)", full, lin, car, car / full)};
}

Outcome TrafficCheck(const RecoveryResults& r) {
  const double ratio = r.traffic_ablated / r.full;
  return {ratio >= 1.10, Fmt("traffic-ablated %.3f%% vs full %.3f%% (ratio %.2f)", r.traffic_ablated, r.full, ratio)};
}

Outcome SelectionCheck(const fs::path& work) {
  const WorldData d = LoadWorldData(work, "sparse_local");
  TrainConfig tc = TenKSteps();
  {
    // Shrink at the default penalty weight, reported for information.
    const Vocabs v = BuildVocabs(d.split.train);
    const Featurizer fz(v, &d.corpus.traffic, TimeZone(d.corpus.network.timezone));
    const auto train = FeaturizeAll(fz, d.split.train);
    const auto val = FeaturizeAll(fz, d.split.validation);
    Log("pass 1 at the default penalty weight");
    const PassResult p = TrainPass({train, val, TableSizes::Of(v)}, tc, true);
    const Vocabs kept = SelectFeatures(p.best, v, tc.select_eps);
    std::printf("info: sparse_local at reg_weight %.2f keeps %zu of %zu level-15 cells\n", tc.reg_weight,
                kept.cells[0].tokens().size(), v.cells[0].tokens().size());
  }
  tc.reg_weight = 1.0;
  const AblationResult sel = Run(Variant::kFull, d.View(), tc);
  const AblationResult none = Run(Variant::kNoFeatureSelection, d.View(), tc);
  const auto& rep = sel.last_model.report;
  const double before = static_cast<double>(rep.cells_before[0]);
  const double removed = before > 0 ? 1.0 - rep.cells_after[0] / before : 0.0;
  const double a = SliceMape(sel, "all"), b = SliceMape(none, "all");
  const bool pass = removed >= 0.30 && std::fabs(a - b) <= 1.0;
  return {pass, Fmt("reg_weight 1.0 removes %.1f%% of level-15 rows (%zu of %zu kept); test MAPE %.3f%% "
                    "with selection vs %.3f%% without",
                    100.0 * removed, rep.cells_after[0], rep.cells_before[0], a, b)};
}

bool HeldRoute(const std::string& route) {
  return route.rfind("satellite-", 0) == 0 || route.find("-X") != std::string::npos;
}

bool HeldArea(const std::string& route) { return route.rfind("satellite-", 0) == 0; }

Outcome GeneralizationCheck(const fs::path& work) {
  WorldData d = LoadWorldData(work, "generalization");
  const auto drop = [](std::vector<QuantizedShingle>& v) {
    std::erase_if(v, [](const QuantizedShingle& q) { return HeldRoute(q.shingle.route.public_route_id); });
  };
  drop(d.split.train);
  drop(d.split.validation);
  const NoveltySlices slices = ComputeNoveltySlices(d.split.test, BuildVocabs(d.split.train));
  std::vector<size_t> want_routes, want_areas;
  for (size_t i = 0; i < d.split.test.size(); ++i) {
    const std::string& r = d.split.test[i].shingle.route.public_route_id;
    if (HeldRoute(r)) want_routes.push_back(i);
    if (HeldArea(r)) want_areas.push_back(i);
  }
  const bool exact = slices.new_routes == want_routes && slices.new_areas == want_areas && !want_areas.empty();
  const TrainConfig tc = TenKSteps();
  const AblationResult full = Run(Variant::kFull, d.View(), tc);
  const AblationResult coarse = Run(Variant::kNoCoarseCells, d.View(), tc);
  const double a = SliceMape(full, "new_areas"), b = SliceMape(coarse, "new_areas");
  return {exact && a < b,
          Fmt("slices %s (new_routes %zu, new_areas %zu); new-area MAPE full %.3f%% vs no_coarse_cells %.3f%%",
              exact ? "exact" : "MISMATCH", slices.new_routes.size(), slices.new_areas.size(), a, b)};
}

Outcome OracleChecks(const fs::path& work) {
  std::vector<std::string> notes;
  bool pass = true;

  // (a) car baseline against the forward pass with forced output heads.
  {
    TableSizes sizes;
    sizes.route = 4;
    sizes.cells = {8, 6, 3};
    Rng rng(301);
    Params p = InitParams(ModelConfig{}, sizes, rng);
    std::fill(p.w2_seg.data.begin(), p.w2_seg.data.end(), 0.0);
    std::fill(p.w2_stop.data.begin(), p.w2_stop.data.end(), 0.0);
    p.b2_seg = {1.0, 0.0};
    p.b2_stop = {0.0};
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const ExampleFeatures x = oracles::RandomExample(rng, sizes, 1 + static_cast<int>(rng.Below(12)));
      double car = 0.0;
      for (const auto& q : x.quanta) {
        if (q.kind == QuantumKind::kSegment) car += q.d / q.s;
      }
      if (car > 0.0) worst = std::max(worst, std::fabs(Predict(x, p) - car) / car);
    }
    pass &= worst <= 1e-9;
    notes.push_back(Fmt("(a) car rel err %.1e", worst));
  }

  // (b) quantizer length conservation on a generated network.
  {
    const fs::path root = EnsureWorld(work, "tiny");
    const World w = LoadWorld(root);
    const Network& net = w.network();
    const Quantizer quantizer(net);
    Rng rng(302);
    double worst = 0.0;
    int intervals = 0;
    while (intervals < 10000) {
      const int r = static_cast<int>(rng.Below(net.routes.size()));
      const double len = net.ShapeFor(net.routes[r]).length_m();
      double a = rng.Uniform(0.0, len), b = rng.Uniform(0.0, len);
      if (a > b) std::swap(a, b);
      if (b - a < 1e-3) continue;
      double sum = 0.0;
      for (const auto& q : quantizer.Quantize(r, a, b)) {
        if (q.kind == QuantumKind::kSegment) sum += q.traversed_m;
      }
      worst = std::max(worst, std::fabs(sum - (b - a)));
      ++intervals;
    }
    pass &= worst <= 1e-6;
    notes.push_back(Fmt("(b) length err %.1e m over %d intervals", worst, intervals));
  }

  // (c) optimizer against a textbook Adam, with the step-decayed rate.
  {
    Rng rng(303);
    std::vector<double> x(64), m(64), v(64);
    for (double& e : x) e = rng.Normal();
    std::vector<double> ref = x;
    oracles::RefAdam oracle;
    TrainConfig tc;
    tc.decay_every = 3;
    double worst = 0.0;
    for (int t = 1; t <= 10; ++t) {
      std::vector<double> g(x.size());
      for (double& e : g) e = rng.Normal(0.0, std::pow(10.0, rng.Uniform(-3.0, 1.0)));
      const double lr = LearningRate(tc, t - 1);
      const double ref_lr = 0.1 * std::pow(0.97, std::floor((t - 1) / 3.0));
      AdamUpdate(x, g, m, v, t, lr);
      oracle.Step(ref, g, ref_lr);
      for (size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::fabs(x[i] - ref[i]));
    }
    pass &= worst <= 1e-10;
    notes.push_back(Fmt("(c) adam err %.1e", worst));
  }

  // (d) hour embedding initialisation on the unit circle.
  {
    Rng rng(304);
    TableSizes sizes;
    sizes.route = 2;
    sizes.cells = {2, 2, 2};
    const Params p = InitParams(ModelConfig{}, sizes, rng);
    double worst = 0.0;
    for (int h = 0; h < kHourSlices; ++h) {
      const double angle = 2.0 * std::numbers::pi * h / kHourSlices;
      worst = std::max(worst, std::fabs(p.tables[kHourTable].at(h, 0) - std::cos(angle)));
      worst = std::max(worst, std::fabs(p.tables[kHourTable].at(h, 1) - std::sin(angle)));
    }
    pass &= worst <= 1e-12;
    notes.push_back(Fmt("(d) hour err %.1e", worst));
  }

  std::string detail;
  for (const auto& n : notes) detail += (detail.empty() ? "" : "; ") + n;
  return {pass, detail};
}

struct PipelineOutput {
  std::string checkpoint;
  std::string eval_csv;
};

PipelineOutput RunPipeline(const fs::path& world, const fs::path& out) {
  const WorldSpec spec = PresetWorld("tiny", 1);
  PipelineConfig cfg = ConfigFor(spec, world);
  cfg.train.steps = 2000;
  cfg.train.decay_every = 20;
  cfg.train.seed = 7;
  Corpus corpus = LoadCorpus(cfg);
  const SplitShingles split =
      SplitItems(BuildShingles(corpus.network, corpus.traces, cfg.shingler, cfg.train.seed), cfg.weeks);
  SaveSplit(out / "data", split);
  const TimeZone tz(corpus.network.timezone);
  const TrainedModel model = TrainFull({split.train, split.validation, &corpus.traffic, tz, {}}, cfg.train);
  SaveModel(out / "model", model);
  const auto preds = PredictItems(model, split.test, &corpus.traffic, tz);
  std::ostringstream csv;
  WriteEvalCsv(csv, EvaluateSlices("full", split.test, preds, BuildVocabs(split.train)));
  return {testing::ReadFile(out / "model" / "checkpoint.json"), csv.str()};
}

Outcome DeterminismCheck(const fs::path& work) {
  const fs::path world = EnsureWorld(work, "tiny");
  Log("pipeline run 1");
  const PipelineOutput a = RunPipeline(world, work / "run_a");
  Log("pipeline run 2");
  const PipelineOutput b = RunPipeline(world, work / "run_b");
  const bool same_ckpt = !a.checkpoint.empty() && a.checkpoint == b.checkpoint;
  const bool same_csv = !a.eval_csv.empty() && a.eval_csv == b.eval_csv;
  return {same_ckpt && same_csv, Fmt("checkpoint %zu bytes %s, eval csv %zu bytes %s", a.checkpoint.size(),
                                     same_ckpt ? "identical" : "DIFFERENT", a.eval_csv.size(),
                                     same_csv ? "identical" : "DIFFERENT")};
}

Outcome SiaCheck() {
  ExampleFeatures base;
  base.route = 3;
  for (int k = 0; k < 4; ++k) {
    QuantumFeatures q;
    q.kind = k % 2 ? QuantumKind::kStop : QuantumKind::kSegment;
    q.cells = {k + 1, k + 2, k + 3};
    q.d = 100.0;
    q.s = 10.0;
    base.quanta.push_back(q);
  }
  const AblationPolicy policy;
  Rng rng(909);
  const int n = 100000;
  std::array<int, 4> counts{};
  for (int k = 0; k < n; ++k) {
    const ExampleFeatures x = ApplySia(base, rng, policy);
    // Classify by the coarsest level that was cleared.
    int level = 3;
    for (int l = kNumCellLevels - 1; l >= 0 && level == 3; --l) {
      if (x.quanta[0].cells[l] == Vocab::kAbsent) level = l;
    }
    ++counts[level];
  }
  const double want[4] = {policy.p[0], policy.p[1], policy.p[2], 1.0 - policy.p[0] - policy.p[1] - policy.p[2]};
  bool pass = true;
  std::string detail;
  for (int k = 0; k < 4; ++k) {
    const double rate = counts[k] / static_cast<double>(n);
    pass &= std::fabs(rate - want[k]) <= 0.01;
    detail += Fmt("%s%.4f (want %.2f)", k ? ", " : "", rate, want[k]);
  }
  return {pass, "rates 15/12.5/4.5/none: " + detail};
}

int Main(int argc, char** argv) {
  std::unique_ptr<testing::TempDir> temp;
  fs::path work;
  if (argc > 1) {
    work = argv[1];
    fs::create_directories(work);
  } else {
    temp = std::make_unique<testing::TempDir>();
    work = temp->path();
  }

  std::array<Outcome, 10> out;
  const auto guarded = [](const std::function<Outcome()>& f) -> Outcome {
    try {
      return f();
    } catch (const std::exception& e) {
      return {false, std::string("exception: ") + e.what()};
    }
  };

  out[1] = guarded(GradientCheck);
  out[2] = guarded(ShingleCheck);
  out[7] = guarded([&] { return OracleChecks(work); });
  out[9] = guarded(SiaCheck);
  out[8] = guarded([&] { return DeterminismCheck(work); });

  RecoveryResults rec;
  std::string rec_error;
  try {
    const WorldData d = LoadWorldData(work, "recovery");
    rec.baselines = RunBaselines(d.View());
    Log(Fmt("baselines car %.4f linear %.4f", rec.baselines.car_mape, rec.baselines.linear_mape));
    rec.full = SliceMape(Run(Variant::kFull, d.View(), TenKSteps()), "all");
    rec.traffic_ablated = SliceMape(Run(Variant::kTrafficAblated, d.View(), TenKSteps()), "all");
  } catch (const std::exception& e) {
    rec_error = std::string("exception: ") + e.what();
  }
  out[3] = rec_error.empty() ? RecoveryCheck(rec) : Outcome{false, rec_error};
  out[4] = rec_error.empty() ? TrafficCheck(rec) : Outcome{false, rec_error};
  out[5] = guarded([&] { return SelectionCheck(work); });
  out[6] = guarded([&] { return GeneralizationCheck(work); });

  int failed = 0;
  for (int k = 1; k <= 9; ++k) {
    std::printf("criterion %d: %s: %s\n", k, out[k].pass ? "PASS" : "FAIL", out[k].detail.c_str());
    failed += !out[k].pass;
  }
  std::printf("%d of 9 criteria passed\n", 9 - failed);
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace bustr

int main(int argc, char** argv) { return bustr::Main(argc, argv); }
