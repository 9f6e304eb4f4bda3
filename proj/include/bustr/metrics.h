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

#ifndef BUSTR_METRICS_H_
#define BUSTR_METRICS_H_

#include <span>

namespace bustr {

// 100 * mean(|pred - actual| / actual). Error(kInvalidArgument) on empty or
// unequal inputs, or any actual <= 0.
double Mape(std::span<const double> preds, std::span<const double> actuals);

}  // namespace bustr

#endif  // BUSTR_METRICS_H_
