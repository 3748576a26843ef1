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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mwdyn {

/// Base class of every error thrown by the library.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Vector/matrix shape mismatch.
struct dimension_error : error {
  using error::error;
};

/// Population masses or strategy counts violate their constraints.
struct invalid_structure : error {
  using error::error;
};

/// A state vector is negative somewhere or does not conserve mass.
struct invalid_state : error {
  using error::error;
};

/// A matrix expected to be symmetric is not.
struct symmetry_error : error {
  using error::error;
};

/// A congestion network is ill-formed (empty commodity, bad link index).
struct model_error : error {
  using error::error;
};

/// A field cannot be normalized (no declared bounds).
struct normalization_error : error {
  using error::error;
};

/// A single map application failed (non-positive update factor).
struct step_error : error {
  step_error(const std::string& what, std::size_t population)
      : error(what), population(population) {}
  std::size_t population;
};

/// A step-size rule could not produce a usable step.
struct step_rule_failure : error {
  using error::error;
};

/// An operation that requires a non-stationary state was called at a
/// fixed point.
struct fixed_point_error : error {
  using error::error;
};

/// A per-population rate could not be formed (zero average payoff).
struct rate_error : error {
  using error::error;
};

/// The target-aware step bound does not apply at this state.
struct oracle_inapplicable : error {
  using error::error;
};

/// supp(P) is not contained in supp(Q).
struct support_error : error {
  using error::error;
};

/// An argument is outside the operation's domain.
struct domain_error : error {
  using error::error;
};

/// Two flows that must differ are (numerically) identical.
struct degenerate_pair_error : error {
  using error::error;
};

}  // namespace mwdyn
