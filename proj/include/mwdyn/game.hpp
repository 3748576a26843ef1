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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mwdyn/errors.hpp"
#include "mwdyn/random.hpp"

namespace mwdyn {

inline constexpr double kMassTolerance = 1e-12;

enum class Orientation { maximize, minimize };

/// Sign applied to the raw field so that dynamics always reinforce it.
inline double orientation_sign(Orientation o) {
  return o == Orientation::minimize ? -1.0 : 1.0;
}

/// The product-of-simplexes state space: population i has mass `masses[i]`
/// spread over `strategy_counts[i]` pure strategies.
class PopulationStructure {
 public:
  PopulationStructure(std::vector<double> masses,
                      std::vector<std::size_t> strategy_counts)
      : masses_(std::move(masses)), counts_(std::move(strategy_counts)) {
    if (masses_.empty() || counts_.empty())
      throw invalid_structure("population lists must be non-empty");
    if (masses_.size() != counts_.size())
      throw invalid_structure("masses and strategy counts differ in length");
    offsets_.reserve(counts_.size() + 1);
    offsets_.push_back(0);
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      if (!(masses_[i] > 0.0) || !std::isfinite(masses_[i]))
        throw invalid_structure("population mass must be positive");
      if (counts_[i] < 1)
        throw invalid_structure("strategy count must be at least 1");
      offsets_.push_back(offsets_.back() + counts_[i]);
    }
  }

  std::size_t populations() const { return masses_.size(); }
  std::size_t dimension() const { return offsets_.back(); }
  std::size_t count(std::size_t i) const { return counts_[i]; }
  std::size_t offset(std::size_t i) const { return offsets_[i]; }
  double mass(std::size_t i) const { return masses_[i]; }
  const std::vector<double>& masses() const { return masses_; }
  const std::vector<std::size_t>& strategy_counts() const { return counts_; }

  double total_mass() const {
    return std::accumulate(masses_.begin(), masses_.end(), 0.0);
  }

  bool operator==(const PopulationStructure& other) const {
    return masses_ == other.masses_ && counts_ == other.counts_;
  }

 private:
  std::vector<double> masses_;
  std::vector<std::size_t> counts_;
  std::vector<std::size_t> offsets_;
};

inline PopulationStructure make_simplotope(std::vector<double> masses,
                                           std::vector<std::size_t> strategy_counts) {
  return PopulationStructure(std::move(masses), std::move(strategy_counts));
}

/// A point of the simplotope. Immutable once constructed; construction
/// checks nonnegativity and per-population mass conservation.
class State {
 public:
  State(PopulationStructure structure, std::vector<double> values)
      : structure_(std::move(structure)), values_(std::move(values)) {
    if (values_.size() != structure_.dimension())
      throw dimension_error("state has wrong dimension");
    for (double v : values_)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw invalid_state("state coordinates must be nonnegative");
    for (std::size_t i = 0; i < structure_.populations(); ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < structure_.count(i); ++j)
        sum += values_[structure_.offset(i) + j];
      if (std::abs(sum - structure_.mass(i)) > kMassTolerance)
        throw invalid_state("population mass not conserved");
    }
  }

  const PopulationStructure& structure() const { return structure_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }
  std::size_t dimension() const { return values_.size(); }

  std::span<const double> population(std::size_t i) const {
    return std::span<const double>(values_).subspan(structure_.offset(i),
                                                    structure_.count(i));
  }

 private:
  PopulationStructure structure_;
  std::vector<double> values_;
};

/// Barycenter of the simplotope (mass split evenly inside each population).
inline State uniform_state(const PopulationStructure& structure) {
  std::vector<double> v(structure.dimension());
  for (std::size_t i = 0; i < structure.populations(); ++i) {
    const double share = structure.mass(i) / static_cast<double>(structure.count(i));
    for (std::size_t j = 0; j < structure.count(i); ++j)
      v[structure.offset(i) + j] = share;
  }
  return State(structure, std::move(v));
}

inline State random_interior_state(const PopulationStructure& structure, Rng& rng) {
  std::vector<double> v(structure.dimension());
  for (std::size_t i = 0; i < structure.populations(); ++i) {
    auto d = rng.dirichlet(structure.count(i));
    for (std::size_t j = 0; j < structure.count(i); ++j)
      v[structure.offset(i) + j] = structure.mass(i) * d[j];
  }
  return State(structure, std::move(v));
}

/// A population game: a payoff (or cost) field over the simplotope, with an
/// optional scalar potential whose gradient is the raw field, and declared
/// bounds [lo, hi] of the field over the whole simplotope. Built-in families
/// compute the bounds analytically; user-supplied fields must declare them
/// to be normalizable.
struct GameField {
  PopulationStructure structure;
  Orientation orientation = Orientation::maximize;
  std::function<std::vector<double>(const State&)> evaluate;
  std::function<double(const State&)> potential;  // empty when absent
  std::optional<std::pair<double, double>> bounds;
  std::optional<Eigen::MatrixXd> payoff_matrix;  // single-population linear games

  bool has_potential() const { return static_cast<bool>(potential); }

  std::vector<double> operator()(const State& x) const {
    if (!(x.structure() == structure))
      throw dimension_error("state does not match the game's structure");
    return evaluate(x);
  }
};

/// Field reinforced by the dynamics: F for payoffs, -c for costs.
inline std::vector<double> signed_field(const GameField& game, const State& x) {
  auto f = game(x);
  if (game.orientation == Orientation::minimize)
    for (auto& v : f) v = -v;
  return f;
}

/// Single-population game with payoff vector CX.
inline GameField linear_symmetric_game(const Eigen::MatrixXd& payoff_matrix) {
  if (payoff_matrix.rows() != payoff_matrix.cols())
    throw dimension_error("payoff matrix must be square");
  const auto n = static_cast<std::size_t>(payoff_matrix.rows());
  GameField game{
      .structure = make_simplotope({1.0}, {n}),
      .orientation = Orientation::maximize,
      .evaluate = {},
      .potential = {},
      .bounds = std::pair{payoff_matrix.minCoeff(), payoff_matrix.maxCoeff()},
      .payoff_matrix = payoff_matrix,
  };
  game.evaluate = [C = payoff_matrix, n](const State& x) {
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        s += C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * x[j];
      out[i] = s;
    }
    return out;
  };
  return game;
}

/// Doubly symmetric game with potential (1/2) X.SX, whose gradient is SX.
inline GameField standard_qp_game(const Eigen::MatrixXd& s_matrix) {
  if (s_matrix.rows() != s_matrix.cols())
    throw dimension_error("matrix must be square");
  if ((s_matrix - s_matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw symmetry_error("matrix must be symmetric");
  GameField game = linear_symmetric_game(s_matrix);
  game.potential = [S = s_matrix](const State& x) {
    const auto n = static_cast<std::size_t>(S.rows());
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        acc += x[i] * S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * x[j];
    return 0.5 * acc;
  };
  return game;
}

/// One congestible resource with affine cost offset + slope * load.
struct AffineLink {
  double offset = 0.0;
  double slope = 0.0;

  double cost(double load) const { return offset + slope * load; }
  /// Integral of the cost from 0 to `load`.
  double cost_integral(double load) const {
    return offset * load + 0.5 * slope * load * load;
  }
};

struct Commodity {
  double demand = 0.0;
  std::vector<std::vector<std::size_t>> paths;  // each path = link indices
};

/// Nonatomic congestion model over an explicit path enumeration.
class CongestionNetwork {
 public:
  CongestionNetwork(std::vector<AffineLink> links, std::vector<Commodity> commodities)
      : links_(std::move(links)), commodities_(std::move(commodities)) {
    if (links_.empty()) throw model_error("network has no links");
    if (commodities_.empty()) throw model_error("network has no commodities");
    for (const auto& c : commodities_) {
      if (c.paths.empty()) throw model_error("commodity has no path");
      if (!(c.demand > 0.0)) throw model_error("commodity demand must be positive");
      for (const auto& path : c.paths) {
        if (path.empty()) throw model_error("empty path");
        for (auto e : path)
          if (e >= links_.size()) throw model_error("path references unknown link");
      }
    }
  }

  const std::vector<AffineLink>& links() const { return links_; }
  const std::vector<Commodity>& commodities() const { return commodities_; }

  std::size_t path_count() const {
    std::size_t n = 0;
    for (const auto& c : commodities_) n += c.paths.size();
    return n;
  }

  double total_demand() const {
    double d = 0.0;
    for (const auto& c : commodities_) d += c.demand;
    return d;
  }

  PopulationStructure structure() const {
    std::vector<double> masses;
    std::vector<std::size_t> counts;
    for (const auto& c : commodities_) {
      masses.push_back(c.demand);
      counts.push_back(c.paths.size());
    }
    return PopulationStructure(std::move(masses), std::move(counts));
  }

  /// Per-link load induced by per-path flows (concatenated over commodities).
  std::vector<double> link_loads(std::span<const double> path_flows) const {
    if (path_flows.size() != path_count())
      throw dimension_error("flow vector has wrong dimension");
    std::vector<double> loads(links_.size(), 0.0);
    std::size_t k = 0;
    for (const auto& c : commodities_)
      for (const auto& path : c.paths) {
        for (auto e : path) loads[e] += path_flows[k];
        ++k;
      }
    return loads;
  }

  /// Per-path delays under the loads induced by `path_flows`.
  std::vector<double> path_costs(std::span<const double> path_flows) const {
    const auto loads = link_loads(path_flows);
    std::vector<double> out;
    out.reserve(path_count());
    for (const auto& c : commodities_)
      for (const auto& path : c.paths) {
        double delay = 0.0;
        for (auto e : path) delay += links_[e].cost(loads[e]);
        out.push_back(delay);
      }
    return out;
  }

 private:
  std::vector<AffineLink> links_;
  std::vector<Commodity> commodities_;
};

/// Minimize-cost game whose field is the per-path delay vector and whose
/// potential is the sum of per-link cost integrals.
inline GameField congestion_game(const CongestionNetwork& network) {
  const double total = network.total_demand();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& c : network.commodities())
    for (const auto& path : c.paths) {
      double at_zero = 0.0, at_full = 0.0;
      for (auto e : path) {
        at_zero += network.links()[e].cost(0.0);
        at_full += network.links()[e].cost(total);
      }
      lo = std::min(lo, at_zero);
      hi = std::max(hi, at_full);
    }
  GameField game{
      .structure = network.structure(),
      .orientation = Orientation::minimize,
      .evaluate = [network](const State& x) { return network.path_costs(x.values()); },
      .potential =
          [network](const State& x) {
            const auto loads = network.link_loads(x.values());
            double acc = 0.0;
            for (std::size_t e = 0; e < loads.size(); ++e)
              acc += network.links()[e].cost_integral(loads[e]);
            return acc;
          },
      .bounds = std::pair{lo, hi},
      .payoff_matrix = {},
  };
  return game;
}

/// Per-population average of the raw field, (1/w_i) X_i . F_i(X).
inline std::vector<double> average_payoff(const GameField& game, const State& x) {
  if (!(x.structure() == game.structure))
    throw dimension_error("state does not match the game's structure");
  const auto f = game(x);
  std::vector<double> out(game.structure.populations(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < game.structure.count(i); ++j) {
      const std::size_t k = game.structure.offset(i) + j;
      s += x[k] * f[k];
    }
    out[i] = s / game.structure.mass(i);
  }
  return out;
}

namespace detail {

/// Affine map constants taking declared bounds [lo, hi] into (0, 1): the
/// image of F + a over b is [1/b, (hi - lo + 1)/b] with symmetric margin.
inline std::pair<double, double> normalization_constants(double lo, double hi) {
  return {1.0 - lo, hi - lo + 2.0};
}

}  // namespace detail

/// Rescales the field affinely into (0, 1) and the masses to total 1. Games
/// whose declared bounds already sit strictly inside (0, 1) with unit total
/// mass are returned unchanged. Matrix-backed games stay matrix-backed so
/// that downstream matrix-aware rules keep working.
inline GameField normalize_game(const GameField& game) {
  if (!game.bounds)
    throw normalization_error("field has no declared bounds");
  const auto [lo, hi] = *game.bounds;
  if (!(std::isfinite(lo) && std::isfinite(hi)) || lo > hi)
    throw normalization_error("declared bounds are not finite");
  const double total = game.structure.total_mass();
  if (lo > 0.0 && hi < 1.0 && std::abs(total - 1.0) <= 1e-15) return game;

  const auto [a, b] = detail::normalization_constants(lo, hi);
  if (game.payoff_matrix) {
    Eigen::MatrixXd scaled =
        (game.payoff_matrix->array() + a).matrix() / b;
    const bool symmetric =
        (scaled - scaled.transpose()).cwiseAbs().maxCoeff() <= 1e-12;
    GameField out = symmetric ? standard_qp_game(scaled) : linear_symmetric_game(scaled);
    out.orientation = game.orientation;
    return out;
  }

  std::vector<double> masses = game.structure.masses();
  for (auto& m : masses) m /= total;
  PopulationStructure scaled_structure(std::move(masses), game.structure.strategy_counts());

  auto unscale = [total](const State& x) {
    std::vector<double> v(x.values().begin(), x.values().end());
    for (auto& c : v) c *= total;
    return v;
  };

  GameField out{
      .structure = scaled_structure,
      .orientation = game.orientation,
      .evaluate =
          [inner = game, unscale, a, b](const State& x) {
            State original(inner.structure, unscale(x));
            auto f = inner.evaluate(original);
            for (auto& v : f) v = (v + a) / b;
            return f;
          },
      .potential = {},
      .bounds = std::pair{(lo + a) / b, (hi + a) / b},
      .payoff_matrix = {},
  };
  if (game.has_potential()) {
    out.potential = [inner = game, unscale, a, b, total](const State& x) {
      State original(inner.structure, unscale(x));
      double mass_term = 0.0;
      for (double v : x.values()) mass_term += v;
      return inner.potential(original) / (b * total) + (a / b) * mass_term;
    };
  }
  return out;
}

}  // namespace mwdyn
