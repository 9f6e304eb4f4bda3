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

#include "bustr/predict.h"

#include <algorithm>

#include "bustr/error.h"

namespace bustr {

StopPairInterval ResolveStopPair(const Network& network, const StopPairQuery& query) {
  const std::vector<int> candidates = network.MatchRoutes(query.route);
  if (candidates.empty()) throw Error(ErrorCode::kNotFound, "route " + query.route);
  for (const std::string& stop : {query.origin_stop, query.destination_stop}) {
    if (!network.stops.count(stop)) throw Error(ErrorCode::kNotFound, "unknown stop " + stop);
  }
  for (int ri : candidates) {
    const Route& route = network.routes[ri];
    const auto& ids = route.key.stop_ids;
    const auto o = std::find(ids.begin(), ids.end(), query.origin_stop);
    if (o == ids.end()) continue;
    const auto d = std::find(o + 1, ids.end(), query.destination_stop);
    if (d == ids.end()) continue;
    StopPairInterval out;
    out.route_index = ri;
    out.start_m = route.stop_offsets[o - ids.begin()];
    out.end_m = route.stop_offsets[d - ids.begin()];
    return out;
  }
  throw Error(ErrorCode::kNotFound, "no route " + query.route + " serves " + query.origin_stop +
                                        " then " + query.destination_stop);
}

Predictor::Predictor(const Network& network, const Quantizer& quantizer,
                     const Featurizer& featurizer, const Params& params)
    : network_(network), quantizer_(quantizer), featurizer_(featurizer), params_(params) {}

std::vector<Quantum> Predictor::Quanta(const StopPairQuery& query) const {
  const StopPairInterval iv = ResolveStopPair(network_, query);
  return quantizer_.Quantize(iv.route_index, iv.start_m, iv.end_m,
                             Quantizer::Stops::kWithEndpoints);
}

double Predictor::Predict(const StopPairQuery& query) const {
  const StopPairInterval iv = ResolveStopPair(network_, query);
  const Route& route = network_.routes[iv.route_index];
  const auto quanta = quantizer_.Quantize(iv.route_index, iv.start_m, iv.end_m,
                                          Quantizer::Stops::kWithEndpoints);
  const ExampleFeatures x =
      featurizer_.FeaturizeQuery(route.key, route.shape_id, query.departure_ts, quanta);
  return bustr::Predict(x, params_);
}

}  // namespace bustr
