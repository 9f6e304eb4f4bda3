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

// Hand-built example sets shared by the training and evaluation tests.

#ifndef BUSTR_TESTS_FIXTURES_H_
#define BUSTR_TESTS_FIXTURES_H_

#include <cmath>
#include <string>
#include <vector>

#include "bustr/rng.h"
#include "bustr/shingler.h"

namespace bustr::testing {

// Items on a straight east-west corridor; duration is 1.3x car time plus
// 15 s per stop, with a slow patch of cells east of 20.42.
inline std::vector<QuantizedShingle> Corridor(Rng& rng, int n, double lng0 = 20.40,
                                               const std::string& route_prefix = "r") {
  std::vector<QuantizedShingle> out;
  for (int i = 0; i < n; ++i) {
    QuantizedShingle item;
    const int route = static_cast<int>(rng.Below(3));
    item.shingle.route = {"f", route_prefix + std::to_string(route), {"a", "b"}};
    item.shingle.shape_id = "s";
    item.shingle.start_ts = 1704067200 + static_cast<int64_t>(rng.Below(7 * 86400));
    double duration = 0.0;
    const int nq = 2 + static_cast<int>(rng.Below(5));
    for (int k = 0; k < nq; ++k) {
      Quantum q;
      const double lng = lng0 + rng.Uniform(0.0, 0.05);
      q.cells = ModelCells({10.3, lng});
      if (k % 2) {
        q.kind = QuantumKind::kStop;
        duration += 15.0;
      } else {
        q.kind = QuantumKind::kSegment;
        q.segment_index = k;
        q.traversed_m = rng.Uniform(50.0, 300.0);
        duration += q.traversed_m / 10.0 * (lng > lng0 + 0.02 ? 1.8 : 1.3);
      }
      item.quanta.push_back(q);
    }
    item.shingle.end_ts = item.shingle.start_ts + static_cast<int64_t>(std::lround(duration));
    out.push_back(item);
  }
  return out;
}

}  // namespace bustr::testing

#endif  // BUSTR_TESTS_FIXTURES_H_
