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

#ifndef BUSTR_RNG_H_
#define BUSTR_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace bustr {

// Seeded random source. The engine is std::mt19937_64, whose output sequence
// is fixed by the standard; the real-valued transforms are spelled out here
// because the <random> distributions are implementation-defined, and
// checkpoints must be reproducible across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n). n must be positive.
  uint64_t Below(uint64_t n);

  // Standard normal via Box-Muller; the spare value is cached.
  double Normal();
  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stable 64-bit mix of a seed and a label (FNV-1a followed by splitmix64),
// used to derive independent per-trace / per-trial streams.
uint64_t DeriveSeed(uint64_t seed, std::string_view label);
uint64_t DeriveSeed(uint64_t seed, uint64_t salt);

// FNV-1a over bytes; stable across platforms.
uint64_t Fnv1a64(std::string_view bytes);

}  // namespace bustr

#endif  // BUSTR_RNG_H_
