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

#include "bustr/metrics.h"

#include <cmath>

#include "bustr/error.h"

namespace bustr {

double Mape(std::span<const double> preds, std::span<const double> actuals) {
  if (preds.empty() || preds.size() != actuals.size()) {
    throw Error(ErrorCode::kInvalidArgument, "mape needs equal, nonzero lengths");
  }
  double sum = 0.0;
  for (size_t i = 0; i < preds.size(); ++i) {
    if (!(actuals[i] > 0.0)) throw Error(ErrorCode::kInvalidArgument, "mape actual <= 0");
    sum += std::fabs(preds[i] - actuals[i]) / actuals[i];
  }
  return 100.0 * sum / static_cast<double>(preds.size());
}

}  // namespace bustr
