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
#include <span>

#include "mwdyn/errors.hpp"

namespace mwdyn {

/// Kullback-Leibler divergence sum p ln(p/q) with the conventions
/// 0 * inf = 0 and 0/0 = 1, so supp(P) must be contained in supp(Q).
/// Terms with q near p go through log1p; the naive log loses all precision
/// once P and Q agree to ~8 digits, which matters when the divergence is
/// used as a Lyapunov ledger near a fixed point.
inline double relative_entropy(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw dimension_error("vectors differ in length");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0) || !(q[i] >= 0.0))
      throw domain_error("entries must be nonnegative");
    if (p[i] == 0.0) continue;
    if (q[i] <= 0.0) throw support_error("supp(P) not contained in supp(Q)");
    const double r = (q[i] - p[i]) / p[i];
    if (std::abs(r) < 0.5)
      acc -= p[i] * std::log1p(r);
    else
      acc += p[i] * std::log(p[i] / q[i]);
  }
  return acc;
}

}  // namespace mwdyn
