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

// Batch entry points: synth-gen, ingest, shingle, train, eval, predict,
// ablate, baseline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bustr/baselines_eval.h"
#include "bustr/error.h"
#include "bustr/pipeline.h"
#include "bustr/predict.h"
#include "bustr/synthworld.h"

namespace fs = std::filesystem;

namespace bustr {
namespace {

struct Common {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<int> threads;
  std::string out;
};

void AddCommon(CLI::App* cmd, Common& c, bool needs_out) {
  cmd->add_option("--config", c.config, "pipeline config file")->required();
  cmd->add_option("--seed", c.seed, "overrides the config seed");
  cmd->add_option("--threads", c.threads, "caps worker threads");
  auto* out = cmd->add_option("--out", c.out, "output directory");
  if (needs_out) out->required();
}

PipelineConfig LoadConfig(const Common& c) {
  PipelineConfig cfg = PipelineConfig::Load(c.config);
  if (c.seed) cfg.train.seed = *c.seed;
  if (c.threads) {
    if (*c.threads < 1) throw Error(ErrorCode::kInvalidArgument, "--threads must be >= 1");
    cfg.train.threads = *c.threads;
  }
  return cfg;
}

Network LoadNetwork(const PipelineConfig& cfg) {
  GtfsOptions gtfs = cfg.gtfs;
  if (!cfg.feed_id.empty()) gtfs.feed_id = cfg.feed_id;
  return ParseGtfsStatic(cfg.gtfs_dir, gtfs);
}

TrafficTable LoadTraffic(const PipelineConfig& cfg) {
  return ParseTraffic(cfg.traffic, cfg.traffic_bucket_minutes).table;
}

void WriteJson(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void WriteEval(const fs::path& dir, const std::vector<EvalReport>& reports) {
  fs::create_directories(dir);
  std::ofstream csv(dir / "eval.csv");
  if (!csv) throw Error(ErrorCode::kIo, "cannot write " + (dir / "eval.csv").string());
  WriteEvalCsv(csv, reports);
  WriteJson(dir / "eval.json", EvalSummaryJson(reports));
}

void Progress(int pass, const CurvePoint& p) {
  std::fprintf(stderr, "pass %d step %lld train_loss %.6g val_mape %.6g\n", pass,
               static_cast<long long>(p.step), p.train_loss, p.val_mape);
}

int SynthGen(const std::string& preset, uint64_t seed, const std::string& out) {
  const WorldSpec spec = PresetWorld(preset, seed);
  GenerateWorld(spec, out);
  const WorldPaths paths = WorldPaths::In(out);
  PipelineConfig cfg;
  cfg.gtfs_dir = fs::relative(paths.gtfs, paths.root);
  cfg.vehicle_positions = fs::relative(paths.vehicle_positions, paths.root);
  cfg.traffic = fs::relative(paths.traffic, paths.root);
  cfg.feed_id = spec.feed_id;
  cfg.traffic_bucket_minutes = spec.traffic_bucket_min;
  cfg.train.seed = seed;
  std::ofstream f(paths.root / "pipeline.cfg");
  if (!f) throw Error(ErrorCode::kIo, "cannot write pipeline.cfg");
  cfg.Write(f);
  return 0;
}

int Ingest(const Common& c) {
  const PipelineConfig cfg = LoadConfig(c);
  const Corpus corpus = LoadCorpus(cfg);
  nlohmann::ordered_json j;
  j["stops"] = corpus.network.stops.size();
  j["routes"] = corpus.network.routes.size();
  j["shapes"] = corpus.network.shapes.size();
  j["traces"] = corpus.traces.size();
  j["counters"] = corpus.counters.all();
  if (c.out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    fs::create_directories(c.out);
    WriteJson(fs::path(c.out) / "ingest.json", j);
  }
  return 0;
}

int Shingle(const Common& c) {
  const PipelineConfig cfg = LoadConfig(c);
  Corpus corpus = LoadCorpus(cfg);
  auto items = BuildShingles(corpus.network, corpus.traces, cfg.shingler, cfg.train.seed,
                             &corpus.counters);
  const SplitShingles split = SplitItems(std::move(items), cfg.weeks);
  SaveSplit(c.out, split);
  WriteJson(fs::path(c.out) / "counters.json", corpus.counters.all());
  for (const auto& w : split.split.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  return 0;
}

int Train(const Common& c, const std::string& data_dir, const std::string& variant) {
  const PipelineConfig cfg = LoadConfig(c);
  const Network net = LoadNetwork(cfg);
  const TrafficTable traffic = LoadTraffic(cfg);
  const SplitShingles split = LoadSplit(data_dir);
  const EvalData data{split.train, split.validation, split.test, &traffic, TimeZone(net.timezone)};
  const VariantSetup setup = PrepareVariant(ParseVariant(variant), data, cfg.train);
  const TrainInputs in{split.train, split.validation, &traffic, data.timezone, setup.features};
  SaveModel(c.out, TrainFull(in, setup.config, Progress));
  return 0;
}

int Eval(const Common& c, const std::string& data_dir, const std::string& model_dir) {
  const PipelineConfig cfg = LoadConfig(c);
  const Network net = LoadNetwork(cfg);
  const TrafficTable traffic = LoadTraffic(cfg);
  const SplitShingles split = LoadSplit(data_dir);
  if (split.test.empty()) throw Error(ErrorCode::kInvalidArgument, "empty test split");
  const TrainedModel model = LoadModel(model_dir);
  const auto preds = PredictItems(model, split.test, &traffic, TimeZone(net.timezone));
  const std::string name = model_dir.empty() ? "model" : fs::path(model_dir).filename().string();
  WriteEval(c.out, EvaluateSlices(name, split.test, preds, BuildVocabs(split.train)));
  return 0;
}

int Predict(const Common& c, const std::string& model_dir, const StopPairQuery& q) {
  const PipelineConfig cfg = LoadConfig(c);
  const Network net = LoadNetwork(cfg);
  const TrafficTable traffic = LoadTraffic(cfg);
  const TrainedModel model = LoadModel(model_dir);
  const Quantizer quantizer(net);
  const Featurizer fz(model.vocabs, &traffic, TimeZone(net.timezone), model.features);
  const Predictor predictor(net, quantizer, fz, model.params);
  std::printf("%.3f\n", predictor.Predict(q));
  return 0;
}

int Ablate(const Common& c, const std::string& data_dir) {
  const PipelineConfig cfg = LoadConfig(c);
  const Network net = LoadNetwork(cfg);
  const TrafficTable traffic = LoadTraffic(cfg);
  const SplitShingles split = LoadSplit(data_dir);
  const EvalData data{split.train, split.validation, split.test, &traffic, TimeZone(net.timezone)};
  std::vector<EvalReport> reports;
  for (const auto& name : cfg.variants) {
    std::fprintf(stderr, "variant %s\n", name.c_str());
    auto r = AblationRun(ParseVariant(name), data, cfg.train, cfg.trials, Progress);
    reports.insert(reports.end(), r.reports.begin(), r.reports.end());
  }
  WriteEval(c.out, reports);
  return 0;
}

int Baseline(const Common& c, const std::string& data_dir) {
  const PipelineConfig cfg = LoadConfig(c);
  const Network net = LoadNetwork(cfg);
  const TrafficTable traffic = LoadTraffic(cfg);
  const SplitShingles split = LoadSplit(data_dir);
  const EvalData data{split.train, split.validation, split.test, &traffic, TimeZone(net.timezone)};
  const BaselineReport b = RunBaselines(data);
  nlohmann::ordered_json j;
  j["car_mape"] = b.car_mape;
  j["linear_mape"] = b.linear_mape;
  j["linear_weights"] = b.linear.weights();
  if (c.out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    fs::create_directories(c.out);
    WriteJson(fs::path(c.out) / "baselines.json", j);
  }
  return 0;
}

int Run(int argc, char** argv) {
  CLI::App app{"Bus travel-time prediction pipeline"};
  app.require_subcommand(1);

  std::string preset;
  uint64_t gen_seed = 1;
  std::string gen_out;
  auto* synth = app.add_subcommand("synth-gen", "write a synthetic world and its pipeline.cfg");
  synth->add_option("--preset", preset, "tiny, recovery, sparse_local or generalization")->required();
  synth->add_option("--seed", gen_seed, "world seed");
  synth->add_option("--out", gen_out, "output directory")->required();

  Common ingest_c, shingle_c, train_c, eval_c, predict_c, ablate_c, baseline_c;
  std::string data_dir, model_dir, variant = "full";
  StopPairQuery query;

  auto* ingest = app.add_subcommand("ingest", "parse inputs and report counters");
  AddCommon(ingest, ingest_c, false);

  auto* shingle = app.add_subcommand("shingle", "extract, quantize and split shingles");
  AddCommon(shingle, shingle_c, true);

  auto* train = app.add_subcommand("train", "train a model on a shingle directory");
  AddCommon(train, train_c, true);
  train->add_option("--data", data_dir, "shingle directory")->required();
  train->add_option("--variant", variant, "feature variant");

  auto* eval = app.add_subcommand("eval", "score a model on the test split");
  AddCommon(eval, eval_c, true);
  eval->add_option("--data", data_dir, "shingle directory")->required();
  eval->add_option("--model", model_dir, "model directory")->required();

  auto* predict = app.add_subcommand("predict", "travel time between two stops, in seconds");
  AddCommon(predict, predict_c, false);
  predict->add_option("--model", model_dir, "model directory")->required();
  predict->add_option("--route", query.route, "route id")->required();
  predict->add_option("--from", query.origin_stop, "origin stop id")->required();
  predict->add_option("--to", query.destination_stop, "destination stop id")->required();
  predict->add_option("--departure", query.departure_ts, "departure, epoch seconds")->required();

  auto* ablate = app.add_subcommand("ablate", "train and score every configured variant");
  AddCommon(ablate, ablate_c, true);
  ablate->add_option("--data", data_dir, "shingle directory")->required();

  auto* baseline = app.add_subcommand("baseline", "car-time and linear baselines");
  AddCommon(baseline, baseline_c, false);
  baseline->add_option("--data", data_dir, "shingle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return 2;
  }

  if (*synth) return SynthGen(preset, gen_seed, gen_out);
  if (*ingest) return Ingest(ingest_c);
  if (*shingle) return Shingle(shingle_c);
  if (*train) return Train(train_c, data_dir, variant);
  if (*eval) return Eval(eval_c, data_dir, model_dir);
  if (*predict) return Predict(predict_c, model_dir, query);
  if (*ablate) return Ablate(ablate_c, data_dir);
  if (*baseline) return Baseline(baseline_c, data_dir);
  return 2;
}

}  // namespace
}  // namespace bustr

int main(int argc, char** argv) {
  try {
    return bustr::Run(argc, argv);
  } catch (const bustr::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
  }
  return 1;
}
