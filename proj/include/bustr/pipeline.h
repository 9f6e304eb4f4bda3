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

// Pipeline configuration and the stages shared by the CLI and the tests.
//
// Config files hold one "key = value" per line; '#' starts a comment. Unknown
// or repeated keys are errors. Relative paths resolve against the config
// file's directory.

#ifndef BUSTR_PIPELINE_H_
#define BUSTR_PIPELINE_H_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bustr/baselines_eval.h"
#include "bustr/ingest.h"
#include "bustr/shingler.h"
#include "bustr/trainer.h"

namespace bustr {

struct PipelineConfig {
  std::filesystem::path gtfs_dir;
  std::filesystem::path vehicle_positions;
  std::filesystem::path traffic;
  std::string feed_id;
  int traffic_bucket_minutes = 5;
  GtfsOptions gtfs;
  TraceOptions traces;
  ShinglerConfig shingler;
  WeekAssignment weeks;
  TrainConfig train;
  int trials = 1;
  std::vector<std::string> variants{"full"};

  // Error(kParse) with the line number for malformed lines, unknown or
  // repeated keys and bad values.
  static PipelineConfig Parse(std::istream& in, const std::filesystem::path& base_dir = {});
  static PipelineConfig Load(const std::filesystem::path& path);
  // Every key with its current value, in Parse format.
  void Write(std::ostream& out) const;
};

// Parsed network, snapped traces and traffic, with all ingest counters.
struct Corpus {
  Network network;
  std::vector<Trace> traces;
  TrafficTable traffic;
  Counters counters;
};

Corpus LoadCorpus(const PipelineConfig& config);

// Shingles every trace and quantizes each shingle, in trace order.
std::vector<QuantizedShingle> BuildShingles(const Network& network, std::span<const Trace> traces,
                                            const ShinglerConfig& config, uint64_t seed,
                                            Counters* counters = nullptr);

struct SplitShingles {
  std::vector<QuantizedShingle> train;
  std::vector<QuantizedShingle> validation;
  std::vector<QuantizedShingle> test;
  WeekSplit split;
};

SplitShingles SplitItems(std::vector<QuantizedShingle> items, const WeekAssignment& weeks);

// train.jsonl, validation.jsonl, test.jsonl and split.json under `dir`.
void SaveSplit(const std::filesystem::path& dir, const SplitShingles& split);
SplitShingles LoadSplit(const std::filesystem::path& dir);

// checkpoint.json, one vocab_<name>.txt per vocabulary and train_report.csv
// under `dir`.
void SaveModel(const std::filesystem::path& dir, const TrainedModel& model);
// Restores vocabularies, parameters and feature options; Error(kMismatch)
// when the vocab files do not match the checkpoint.
TrainedModel LoadModel(const std::filesystem::path& dir);

}  // namespace bustr

#endif  // BUSTR_PIPELINE_H_
