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

// Stop-to-stop travel-time queries against a trained model.

#ifndef BUSTR_PREDICT_H_
#define BUSTR_PREDICT_H_

#include <cstdint>
#include <string>
#include <vector>

#include "bustr/featurizer.h"
#include "bustr/model.h"
#include "bustr/shingler.h"

namespace bustr {

struct StopPairQuery {
  std::string route;  // public route id or full route token
  std::string origin_stop;
  std::string destination_stop;
  int64_t departure_ts = 0;
};

struct StopPairInterval {
  int route_index = -1;
  double start_m = 0.0;
  double end_m = 0.0;
};

// Resolves the query to an along-shape interval on the first matching route
// that serves the origin and later the destination. The origin is its first
// occurrence on that route and the destination the first occurrence after it.
// Error(kNotFound) for an unknown route or stop, or when no matching route
// serves the pair in order.
StopPairInterval ResolveStopPair(const Network& network, const StopPairQuery& query);

class Predictor {
 public:
  // All references must outlive the predictor.
  Predictor(const Network& network, const Quantizer& quantizer, const Featurizer& featurizer,
            const Params& params);

  // Quanta for the query: every stop in [origin, destination] and every
  // segment overlapping the interval.
  std::vector<Quantum> Quanta(const StopPairQuery& query) const;
  double Predict(const StopPairQuery& query) const;

 private:
  const Network& network_;
  const Quantizer& quantizer_;
  const Featurizer& featurizer_;
  const Params& params_;
};

}  // namespace bustr

#endif  // BUSTR_PREDICT_H_
