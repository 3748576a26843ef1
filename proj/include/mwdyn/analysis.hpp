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

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mwdyn/dynamics.hpp"
#include "mwdyn/entropy.hpp"
#include "mwdyn/errors.hpp"
#include "mwdyn/format.hpp"
#include "mwdyn/game.hpp"

namespace mwdyn {

/// First difference of the Lyapunov candidate V(X) = RE(target, X) along one
/// step of the chosen dynamic: RE(target, T(X)) - RE(target, X).
inline double lyapunov_first_difference(const GameField& game, const State& x,
                                        const State& target, std::span<const double> rates,
                                        Dynamic dynamic) {
  const State next = apply_step(dynamic, game, x, rates);
  return relative_entropy(target.values(), next.values()) -
         relative_entropy(target.values(), x.values());
}

inline double lyapunov_first_difference(const GameField& game, const State& x,
                                        const State& target, double alpha, Dynamic dynamic) {
  return lyapunov_first_difference(game, x, target, uniform_rates(game, alpha), dynamic);
}

struct KantorovichBound {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// Both sides of the Kantorovich inequality
/// (sum w x)(sum w / x) <= ((x_min + x_max) / (2 sqrt(x_min x_max)))^2.
inline KantorovichBound kantorovich_bound(std::span<const double> values,
                                          std::span<const double> weights) {
  if (values.size() != weights.size() || values.empty())
    throw dimension_error("values and weights must have equal positive length");
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw domain_error("weights must be nonnegative");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-9) throw domain_error("weights must sum to 1");
  double mean = 0.0, inv_mean = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0)) throw domain_error("values must be positive");
    mean += weights[i] * values[i];
    inv_mean += weights[i] / values[i];
    lo = std::min(lo, values[i]);
    hi = std::max(hi, values[i]);
  }
  const double cap = 0.5 * (lo + hi) / std::sqrt(lo * hi);
  return KantorovichBound{mean * inv_mean, cap * cap};
}

/// Kantorovich cap over the update factors of one replicator application,
/// g = ((G_min + G_max) / 2)^2 / (G_min G_max), with extrema taken over the
/// supported strategies. Equals 1 at alpha = 0 and approaches 1
/// quadratically as alpha shrinks.
inline double g_factor(const GameField& game, const State& x, double alpha,
                       double support_tol = 0.0) {
  const auto field = signed_field(game, x);
  const auto avg = detail::signed_averages(game, x, field);
  return 1.0 + detail::g_excess(
                   detail::factor_deviation_range(game, x, field, avg, alpha, support_tol));
}

/// Largest payoff spread over the support across populations; zero exactly
/// at the common fixed points of the replicator and hedge maps.
inline double payoff_spread(const GameField& game, const State& x) {
  return detail::max_support_spread(game, x, game(x), 0.0);
}

inline bool is_fixed_point(const GameField& game, const State& x, double tol = 1e-9) {
  if (!(tol >= 0.0)) throw domain_error("tolerance must be nonnegative");
  return payoff_spread(game, x) <= tol;
}

/// Worst violation of the unsupported-strategy side of the Nash
/// characterization: how much an unused strategy beats the used ones.
inline double nash_violation(const GameField& game, const State& x) {
  const auto f = game(x);
  const double sign = orientation_sign(game.orientation);
  double worst = 0.0;
  for (std::size_t i = 0; i < game.structure.populations(); ++i) {
    double best_supported = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < game.structure.count(i); ++j) {
      const std::size_t k = game.structure.offset(i) + j;
      if (x[k] > 0.0) best_supported = std::max(best_supported, sign * f[k]);
    }
    for (std::size_t j = 0; j < game.structure.count(i); ++j) {
      const std::size_t k = game.structure.offset(i) + j;
      if (x[k] > 0.0) continue;
      worst = std::max(worst, sign * f[k] - best_supported);
    }
  }
  return worst;
}

/// Nash test: supported strategies earn equal payoff (within tol) and no
/// unused strategy earns more (costs reversed under minimization).
inline bool is_nash(const GameField& game, const State& x, double tol = 1e-9) {
  return is_fixed_point(game, x, tol) && nash_violation(game, x) <= tol;
}

enum class EssVerdict { certified_on_samples, refuted, inapplicable };

inline const char* to_string(EssVerdict v) {
  switch (v) {
    case EssVerdict::certified_on_samples: return "certified";
    case EssVerdict::refuted: return "refuted";
    default: return "inapplicable";
  }
}

struct EssCertificate {
  EssVerdict verdict = EssVerdict::inapplicable;
  std::optional<std::vector<double>> witness;  // set when refuted
  double min_superiority = std::numeric_limits<double>::infinity();
  std::size_t samples_checked = 0;
};

inline constexpr double kSuperiorityMargin = 1e-12;

namespace detail {

inline double superiority(const GameField& game, const State& candidate, const State& at) {
  const auto field = signed_field(game, at);
  double s = 0.0;
  for (std::size_t k = 0; k < candidate.dimension(); ++k)
    s += (candidate[k] - at[k]) * field[k];
  return s;
}

}  // namespace detail

/// Sampled check of local superiority (candidate - X) . F(X) > 0 over the
/// radius ball around a Nash candidate. Certification is explicitly only
/// over the drawn samples; a single non-superior sample refutes with the
/// worst witness found. Sampling rejects uniform simplotope draws that fall
/// outside the ball, falling back to shrinking draws toward the candidate
/// when the ball is too small for rejection to be practical.
inline EssCertificate ess_certificate_sample(const GameField& game, const State& candidate,
                                             double radius, std::size_t n_samples,
                                             std::uint64_t rng_seed) {
  if (!(radius > 0.0)) throw domain_error("radius must be positive");
  if (n_samples == 0) throw domain_error("need at least one sample");
  if (!(candidate.structure() == game.structure))
    throw dimension_error("candidate does not match the game");

  EssCertificate cert;
  if (!is_nash(game, candidate)) {
    cert.verdict = EssVerdict::inapplicable;
    return cert;
  }

  Rng rng(rng_seed);
  const std::size_t rejection_budget = std::max<std::size_t>(200 * n_samples, 100000);
  std::size_t attempts = 0;
  double worst = std::numeric_limits<double>::infinity();
  std::optional<std::vector<double>> worst_state;

  auto distance = [&](const State& s) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < s.dimension(); ++k) {
      const double d = s[k] - candidate[k];
      d2 += d * d;
    }
    return std::sqrt(d2);
  };

  std::size_t accepted = 0;
  while (accepted < n_samples) {
    State draw = random_interior_state(game.structure, rng);
    const double dist = distance(draw);
    if (dist < 1e-15) continue;
    std::optional<State> sample;
    if (dist <= radius) {
      sample = std::move(draw);
    } else if (attempts >= rejection_budget) {
      const double t = rng.uniform01() * radius / dist;
      if (t > 1e-12) {
        std::vector<double> v(candidate.values().begin(), candidate.values().end());
        for (std::size_t k = 0; k < v.size(); ++k) v[k] += t * (draw[k] - candidate[k]);
        sample = State(game.structure, std::move(v));
      }
    }
    ++attempts;
    if (!sample) continue;
    ++accepted;
    const double s = detail::superiority(game, candidate, *sample);
    if (s < worst) {
      worst = s;
      worst_state = std::vector<double>(sample->values().begin(), sample->values().end());
    }
  }

  cert.samples_checked = n_samples;
  cert.min_superiority = worst;
  if (worst > kSuperiorityMargin) {
    cert.verdict = EssVerdict::certified_on_samples;
  } else {
    cert.verdict = EssVerdict::refuted;
    cert.witness = std::move(worst_state);
  }
  return cert;
}

struct ClassificationReport {
  bool fixed_point = false;
  bool nash = false;
  EssCertificate ess;
  std::map<std::string, double> residuals;
};

inline ClassificationReport classify_state(const GameField& game, const State& candidate,
                                           double radius, std::size_t n_samples,
                                           std::uint64_t rng_seed, double tol = 1e-9) {
  ClassificationReport report;
  report.fixed_point = is_fixed_point(game, candidate, tol);
  report.nash = is_nash(game, candidate, tol);
  report.ess = ess_certificate_sample(game, candidate, radius, n_samples, rng_seed);
  report.residuals["payoff_spread"] = payoff_spread(game, candidate);
  report.residuals["nash_violation"] = nash_violation(game, candidate);
  if (report.ess.verdict != EssVerdict::inapplicable)
    report.residuals["min_superiority"] = report.ess.min_superiority;
  return report;
}

/// Stable-field-name JSON emission; numbers carry 17 significant digits.
inline std::string report_to_json(const ClassificationReport& report) {
  std::ostringstream os;
  os << "{\"fixed_point\": " << (report.fixed_point ? "true" : "false")
     << ", \"nash\": " << (report.nash ? "true" : "false") << ", \"ess\": \""
     << to_string(report.ess.verdict) << "\"";
  if (report.ess.witness) {
    os << ", \"witness\": [";
    for (std::size_t i = 0; i < report.ess.witness->size(); ++i) {
      if (i) os << ", ";
      os << format17((*report.ess.witness)[i]);
    }
    os << "]";
  }
  os << ", \"residuals\": {";
  bool first = true;
  for (const auto& [name, value] : report.residuals) {
    if (!first) os << ", ";
    first = false;
    os << "\"" << name << "\": " << format17(value);
  }
  os << "}}";
  return os.str();
}

}  // namespace mwdyn
