// Copyright 2026 The mwdyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mwdyn {

/// Seeded generator with platform-independent draws. std::mt19937_64 has a
/// standardized sequence; the real-valued helpers below avoid the
/// implementation-defined std distributions so outputs are reproducible
/// byte-for-byte across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform draw from [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Exponential(1) via inversion.
  double exponential() { return -std::log1p(-uniform01()); }

  /// Uniform point on the unit simplex of dimension n (flat Dirichlet).
  std::vector<double> dirichlet(std::size_t n) {
    std::vector<double> out(n);
    double sum = 0.0;
    for (auto& v : out) {
      v = exponential();
      sum += v;
    }
    for (auto& v : out) v /= sum;
    return out;
  }

  std::uint64_t raw() { return engine_(); }

  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform01() * static_cast<double>(n)) % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mwdyn
