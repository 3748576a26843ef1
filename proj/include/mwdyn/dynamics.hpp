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
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mwdyn/entropy.hpp"
#include "mwdyn/errors.hpp"
#include "mwdyn/format.hpp"
#include "mwdyn/game.hpp"

namespace mwdyn {

enum class Dynamic { replicator, hedge };

namespace detail {

inline void check_rates(const GameField& game, std::span<const double> rates) {
  if (rates.size() != game.structure.populations())
    throw dimension_error("one rate per population required");
  for (double a : rates)
    if (!(a > 0.0) || !std::isfinite(a)) throw domain_error("rates must be positive");
}

inline std::vector<double> signed_averages(const GameField& game, const State& x,
                                           std::span<const double> field) {
  std::vector<double> avg(game.structure.populations(), 0.0);
  for (std::size_t i = 0; i < avg.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < game.structure.count(i); ++j) {
      const std::size_t k = game.structure.offset(i) + j;
      s += x[k] * field[k];
    }
    avg[i] = s / game.structure.mass(i);
  }
  return avg;
}

/// Pins each population's sum to its exact mass by correcting the largest
/// coordinate; keeps drift out of long trajectories.
inline void fix_population_masses(const PopulationStructure& structure,
                                  std::vector<double>& values) {
  for (std::size_t i = 0; i < structure.populations(); ++i) {
    const std::size_t lo = structure.offset(i);
    const std::size_t hi = lo + structure.count(i);
    double sum = 0.0;
    std::size_t largest = lo;
    for (std::size_t k = lo; k < hi; ++k) {
      sum += values[k];
      if (values[k] > values[largest]) largest = k;
    }
    values[largest] -= sum - structure.mass(i);
    if (values[largest] < 0.0) values[largest] = 0.0;
  }
}

/// Multiplicative deviations t = G - 1 of the update factors over the
/// support, computed without forming 1 + x quotients (which would drown the
/// signal in rounding once the payoff spread is small).
struct FactorDeviationRange {
  double tmin = 0.0;
  double tmax = 0.0;
};

inline FactorDeviationRange factor_deviation_range(const GameField& game, const State& x,
                                                   std::span<const double> field,
                                                   std::span<const double> averages,
                                                   double alpha, double support_tol) {
  FactorDeviationRange range;
  bool seen = false;
  for (std::size_t i = 0; i < game.structure.populations(); ++i) {
    const double denom = 1.0 + alpha * averages[i];
    if (!(denom > 0.0)) throw domain_error("update denominator not positive");
    for (std::size_t j = 0; j < game.structure.count(i); ++j) {
      const std::size_t k = game.structure.offset(i) + j;
      if (!(x[k] > support_tol)) continue;
      const double t = alpha * (field[k] - averages[i]) / denom;
      if (!seen || t < range.tmin) range.tmin = t;
      if (!seen || t > range.tmax) range.tmax = t;
      seen = true;
    }
  }
  if (!seen) throw domain_error("state has empty support");
  return range;
}

/// g(alpha) - 1 where g is the Kantorovich cap over the update factors.
inline double g_excess(const FactorDeviationRange& r) {
  const double gmin = 1.0 + r.tmin;
  const double gmax = 1.0 + r.tmax;
  if (!(gmin > 0.0)) throw domain_error("update factor not positive");
  const double spread = r.tmax - r.tmin;
  return spread * spread / (4.0 * gmin * gmax);
}

}  // namespace detail

/// One application of the linearized multiplicative-weights map,
/// x -> x (1 + a F) / (1 + a avg), per population, with the field negated
/// under the minimize-cost orientation. Zero coordinates stay zero and
/// population masses are conserved.
inline State replicator_step(const GameField& game, const State& x,
                             std::span<const double> rates) {
  detail::check_rates(game, rates);
  const auto field = signed_field(game, x);
  const auto avg = detail::signed_averages(game, x, field);
  std::vector<double> out(x.dimension());
  for (std::size_t i = 0; i < game.structure.populations(); ++i) {
    const double denom = 1.0 + rates[i] * avg[i];
    if (!(denom > 0.0))
      throw step_error("non-positive replicator denominator in population " +
                           std::to_string(i),
                       i);
    double sum = 0.0;
    for (std::size_t j = 0; j < game.structure.count(i); ++j) {
      const std::size_t k = game.structure.offset(i) + j;
      const double factor = 1.0 + rates[i] * field[k];
      if (x[k] > 0.0 && !(factor > 0.0))
        throw step_error("non-positive replicator factor in population " +
                             std::to_string(i),
                         i);
      out[k] = x[k] * factor;
      sum += out[k];
    }
    const double scale = game.structure.mass(i) / sum;
    for (std::size_t j = 0; j < game.structure.count(i); ++j)
      out[game.structure.offset(i) + j] *= scale;
  }
  detail::fix_population_masses(game.structure, out);
  return State(game.structure, std::move(out));
}

/// One application of the exponential-weights map,
/// x -> x exp(a F) / norm, with the exponent negated for costs.
inline State hedge_step(const GameField& game, const State& x,
                        std::span<const double> rates) {
  detail::check_rates(game, rates);
  const auto field = signed_field(game, x);
  std::vector<double> out(x.dimension(), 0.0);
  for (std::size_t i = 0; i < game.structure.populations(); ++i) {
    const std::size_t lo = game.structure.offset(i);
    const std::size_t hi = lo + game.structure.count(i);
    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t k = lo; k < hi; ++k) {
      if (x[k] <= 0.0) continue;
      const double e = rates[i] * field[k];
      if (std::abs(e) > 700.0)
        throw step_error("hedge exponent overflow in population " + std::to_string(i), i);
      shift = std::max(shift, e);
    }
    double sum = 0.0;
    for (std::size_t k = lo; k < hi; ++k) {
      if (x[k] <= 0.0) continue;
      out[k] = x[k] * std::exp(rates[i] * field[k] - shift);
      sum += out[k];
    }
    const double scale = game.structure.mass(i) / sum;
    for (std::size_t k = lo; k < hi; ++k) out[k] *= scale;
  }
  detail::fix_population_masses(game.structure, out);
  return State(game.structure, std::move(out));
}

inline std::vector<double> uniform_rates(const GameField& game, double alpha) {
  return std::vector<double>(game.structure.populations(), alpha);
}

inline State replicator_step(const GameField& game, const State& x, double alpha) {
  return replicator_step(game, x, uniform_rates(game, alpha));
}

inline State hedge_step(const GameField& game, const State& x, double alpha) {
  return hedge_step(game, x, uniform_rates(game, alpha));
}

inline State apply_step(Dynamic dynamic, const GameField& game, const State& x,
                        std::span<const double> rates) {
  return dynamic == Dynamic::replicator ? replicator_step(game, x, rates)
                                        : hedge_step(game, x, rates);
}

/// Tangent of the update curve at alpha = 0: component (i, j) equals
/// x_i^j (F_i^j - avg_i), the vector field of the continuous-time
/// replicator (sign flipped for costs). Population blocks sum to zero.
inline std::vector<double> replicator_vector_field(const GameField& game, const State& x) {
  const auto field = signed_field(game, x);
  const auto avg = detail::signed_averages(game, x, field);
  std::vector<double> out(x.dimension());
  for (std::size_t i = 0; i < game.structure.populations(); ++i)
    for (std::size_t j = 0; j < game.structure.count(i); ++j) {
      const std::size_t k = game.structure.offset(i) + j;
      out[k] = x[k] * (field[k] - avg[i]);
    }
  return out;
}

/// Adaptive per-population rates a_i = kappa w_i / (X_i . F_i(X)).
inline std::vector<double> per_population_rates(const GameField& game, const State& x,
                                                double kappa) {
  if (!(kappa > 0.0)) throw domain_error("kappa must be positive");
  if (game.orientation != Orientation::maximize)
    throw domain_error("per-population rates require the payoff orientation");
  const auto avg = average_payoff(game, x);
  std::vector<double> rates(avg.size());
  for (std::size_t i = 0; i < avg.size(); ++i) {
    if (!(avg[i] > 0.0))
      throw rate_error("population " + std::to_string(i) + " has non-positive average payoff");
    rates[i] = kappa / avg[i];
  }
  return rates;
}

struct ConstantRate {
  double alpha = 0.1;
};

struct PerPopulationRate {
  double kappa = 0.1;
};

struct LineSearchRule {
  double alpha0 = 1.0;
  int max_halvings = 60;
};

struct EssOracleRule {
  std::vector<double> target;
  double safety = 0.9;
};

using StepRule = std::variant<ConstantRate, PerPopulationRate, LineSearchRule, EssOracleRule>;

inline void validate_rule(const StepRule& rule) {
  std::visit(
      [](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, ConstantRate>) {
          if (!(r.alpha > 0.0)) throw domain_error("constant rate must be positive");
        } else if constexpr (std::is_same_v<T, PerPopulationRate>) {
          if (!(r.kappa > 0.0)) throw domain_error("kappa must be positive");
        } else if constexpr (std::is_same_v<T, LineSearchRule>) {
          if (!(r.alpha0 > 0.0)) throw domain_error("alpha0 must be positive");
          if (r.max_halvings < 1) throw domain_error("max_halvings must be at least 1");
        } else {
          if (!(r.safety > 0.0 && r.safety < 1.0))
            throw domain_error("safety must lie in (0, 1)");
          if (r.target.empty()) throw domain_error("oracle rule needs a target state");
        }
      },
      rule);
}

struct LineSearchResult {
  double alpha = 0.0;
  double certificate = 1.0;  // accepted value of the descent test, < 1
  int halvings = 0;
  double improvement = 0.0;  // payoff gain of the probe step against x
};

namespace detail {

inline void require_normalized(const GameField& game, const char* who) {
  if (!game.bounds || !(game.bounds->first > 0.0) || !(game.bounds->second < 1.0))
    throw domain_error(std::string(who) + " requires a field normalized into (0, 1)");
  if (std::abs(game.structure.total_mass() - 1.0) > 1e-9)
    throw domain_error(std::string(who) + " requires total population mass 1");
}

inline double max_support_spread(const GameField& game, const State& x,
                                 std::span<const double> field, double support_tol) {
  double worst = 0.0;
  for (std::size_t i = 0; i < game.structure.populations(); ++i) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < game.structure.count(i); ++j) {
      const std::size_t k = game.structure.offset(i) + j;
      if (!(x[k] > support_tol)) continue;
      lo = std::min(lo, field[k]);
      hi = std::max(hi, field[k]);
    }
    if (hi >= lo) worst = std::max(worst, hi - lo);
  }
  return worst;
}

}  // namespace detail

/// Halving search for a step size whose Kantorovich descent certificate
/// validates: accept the first alpha_k = alpha0 / 2^k with
/// g(alpha_k) < 1 + (alpha_k / (1 + alpha_k)) L, where g is the Kantorovich
/// cap over the update factors and L is the payoff improvement of the probe
/// step taken at alpha0. L is measured once at alpha0: the improvement of
/// the candidate's own step shrinks like alpha^2 and can never outrun the
/// g excess, so re-measuring per candidate stalls the search. Both sides of
/// the test are evaluated in deviation form, so acceptance keeps working at
/// payoff spreads far below sqrt(machine epsilon).
inline LineSearchResult line_search_rate(const GameField& game, const State& x,
                                         const LineSearchRule& rule = {},
                                         double support_tol = 0.0) {
  validate_rule(StepRule{rule});
  detail::require_normalized(game, "line search");
  const auto field = signed_field(game, x);
  const auto avg = detail::signed_averages(game, x, field);
  if (detail::max_support_spread(game, x, field, support_tol) <= 1e-13)
    throw fixed_point_error("line search called at a fixed point");

  const State probe = replicator_step(game, x, uniform_rates(game, rule.alpha0));
  double improvement = 0.0;
  for (std::size_t k = 0; k < x.dimension(); ++k)
    improvement += (probe[k] - x[k]) * field[k];
  if (!(improvement > 0.0))
    throw fixed_point_error("no improving direction at this state");

  for (int k = 0; k <= rule.max_halvings; ++k) {
    const double alpha = std::ldexp(rule.alpha0, -k);
    const double excess =
        detail::g_excess(detail::factor_deviation_range(game, x, field, avg, alpha, support_tol));
    const double penalty = (alpha / (1.0 + alpha)) * improvement;
    if (excess < penalty)
      return LineSearchResult{alpha, (1.0 + excess) / (1.0 + penalty), k, improvement};
  }
  throw step_rule_failure("line search exhausted its halving budget");
}

/// Target-aware step bound for single-population linear games: the largest
/// step certified to shrink RE(x*, .) at x, scaled back by `safety` because
/// the certified interval is open.
inline double ess_oracle_rate(const Eigen::MatrixXd& payoff_matrix,
                              std::span<const double> x, std::span<const double> x_star,
                              double safety = 0.9) {
  const auto n = static_cast<std::size_t>(payoff_matrix.rows());
  if (payoff_matrix.rows() != payoff_matrix.cols() || x.size() != n || x_star.size() != n)
    throw dimension_error("matrix/state dimensions disagree");
  if (!(safety > 0.0 && safety < 1.0)) throw domain_error("safety must lie in (0, 1)");
  std::vector<double> cx(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cx[i] += payoff_matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * x[j];
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  double superiority = 0.0;  // accumulated in difference form to survive x near x*
  for (std::size_t i = 0; i < n; ++i) {
    superiority += (x_star[i] - x[i]) * cx[i];
    if (x[i] > 0.0) {
      lo = std::min(lo, cx[i]);
      hi = std::max(hi, cx[i]);
    }
  }
  const double spread = hi - lo;
  if (!(spread > 1e-15))
    throw oracle_inapplicable("payoff spread is degenerate at this state");
  const double discriminant =
      spread * spread * spread * spread / 16.0 + superiority * spread * spread;
  if (!(superiority > 0.0) || !(discriminant > 0.0))
    throw oracle_inapplicable("state is outside the target's superiority region");
  const double bound = -0.5 + std::sqrt(discriminant) / (0.5 * spread * spread);
  return safety * bound;
}

inline double ess_oracle_rate(const GameField& game, const State& x, const State& target,
                              double safety = 0.9) {
  if (!game.payoff_matrix || game.structure.populations() != 1 ||
      game.orientation != Orientation::maximize)
    throw domain_error("oracle rule needs a single-population matrix game");
  return ess_oracle_rate(*game.payoff_matrix, x.values(), target.values(), safety);
}

enum class StopReason { converged, max_iters, step_rule_failure };

inline const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::converged: return "converged";
    case StopReason::max_iters: return "max_iters";
    default: return "step_rule_failure";
  }
}

struct Trajectory {
  std::vector<State> iterates;
  std::vector<double> step_sizes;   // per transition
  std::vector<double> residuals;    // per transition, inf-norm of the move
  std::vector<std::vector<double>> average_payoffs;  // per iterate
  std::optional<std::vector<double>> lyapunov;       // per iterate when a target is set
  StopReason stop_reason = StopReason::max_iters;
  std::string message;
};

/// Iterates the chosen map under the chosen step rule until the state stops
/// moving (inf-norm below stop_tol), the iteration budget runs out, or the
/// rule fails. Rules without an intrinsic step size (line search, oracle)
/// detect convergence with a probe step at alpha = 1.
inline Trajectory run_trajectory(const GameField& game, const State& init,
                                 const StepRule& rule, Dynamic dynamic,
                                 std::size_t max_iters, double stop_tol,
                                 const std::optional<State>& lyapunov_target = {}) {
  validate_rule(rule);
  if (!(stop_tol > 0.0)) throw domain_error("stop_tol must be positive");
  if (!(init.structure() == game.structure))
    throw dimension_error("initial state does not match the game");
  if (lyapunov_target && !(lyapunov_target->structure() == game.structure))
    throw dimension_error("lyapunov target does not match the game");

  Trajectory traj;
  if (lyapunov_target) traj.lyapunov = std::vector<double>{};
  auto record_iterate = [&](const State& s) {
    traj.average_payoffs.push_back(average_payoff(game, s));
    if (traj.lyapunov)
      traj.lyapunov->push_back(relative_entropy(lyapunov_target->values(), s.values()));
  };
  traj.iterates.push_back(init);
  record_iterate(init);

  auto inf_dist = [](const State& a, const State& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.dimension(); ++k)
      d = std::max(d, std::abs(a[k] - b[k]));
    return d;
  };

  traj.stop_reason = StopReason::max_iters;
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    const State& x = traj.iterates.back();
    double alpha_used = 0.0;
    std::optional<State> next;
    try {
      if (const auto* c = std::get_if<ConstantRate>(&rule)) {
        alpha_used = c->alpha;
        next = apply_step(dynamic, game, x, uniform_rates(game, c->alpha));
      } else if (const auto* p = std::get_if<PerPopulationRate>(&rule)) {
        const auto rates = per_population_rates(game, x, p->kappa);
        alpha_used = *std::min_element(rates.begin(), rates.end());
        next = apply_step(dynamic, game, x, rates);
      } else {
        // Probe for convergence first; both rules reject fixed points.
        const State probe = apply_step(dynamic, game, x, uniform_rates(game, 1.0));
        if (inf_dist(probe, x) < stop_tol) {
          traj.stop_reason = StopReason::converged;
          break;
        }
        if (const auto* ls = std::get_if<LineSearchRule>(&rule)) {
          alpha_used = line_search_rate(game, x, *ls, stop_tol).alpha;
        } else {
          const auto& oracle = std::get<EssOracleRule>(rule);
          State target(game.structure, oracle.target);
          alpha_used = ess_oracle_rate(game, x, target, oracle.safety);
        }
        next = apply_step(dynamic, game, x, uniform_rates(game, alpha_used));
      }
    } catch (const step_error& e) {
      traj.stop_reason = StopReason::step_rule_failure;
      traj.message = e.what();
      break;
    } catch (const step_rule_failure& e) {
      traj.stop_reason = StopReason::step_rule_failure;
      traj.message = e.what();
      break;
    } catch (const oracle_inapplicable& e) {
      traj.stop_reason = StopReason::step_rule_failure;
      traj.message = e.what();
      break;
    } catch (const rate_error& e) {
      traj.stop_reason = StopReason::step_rule_failure;
      traj.message = e.what();
      break;
    } catch (const fixed_point_error& e) {
      traj.stop_reason = StopReason::step_rule_failure;
      traj.message = e.what();
      break;
    }

    const double residual = inf_dist(*next, x);
    if (residual < stop_tol) {
      traj.stop_reason = StopReason::converged;
      break;
    }
    traj.iterates.push_back(std::move(*next));
    traj.step_sizes.push_back(alpha_used);
    traj.residuals.push_back(residual);
    record_iterate(traj.iterates.back());
  }
  return traj;
}

/// CSV export: header "iter,x_0..x_{m-1},alpha,residual,lyapunov"; the alpha
/// and residual of row k describe the transition into iterate k, so they are
/// empty on the first row. The lyapunov column is empty without a target.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  if (traj.iterates.empty()) throw domain_error("empty trajectory");
  const std::size_t m = traj.iterates.front().dimension();
  os << "iter";
  for (std::size_t k = 0; k < m; ++k) os << ",x_" << k;
  os << ",alpha,residual,lyapunov\n";
  for (std::size_t i = 0; i < traj.iterates.size(); ++i) {
    os << i;
    for (std::size_t k = 0; k < m; ++k) os << ',' << format17(traj.iterates[i][k]);
    if (i == 0)
      os << ",,";
    else
      os << ',' << format17(traj.step_sizes[i - 1]) << ',' << format17(traj.residuals[i - 1]);
    os << ',';
    if (traj.lyapunov) os << format17((*traj.lyapunov)[i]);
    os << '\n';
  }
}

}  // namespace mwdyn
