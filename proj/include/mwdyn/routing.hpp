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
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mwdyn/errors.hpp"
#include "mwdyn/format.hpp"
#include "mwdyn/game.hpp"

namespace mwdyn {

/// Parallel arcs between one source/destination pair, affine link costs
/// offset_j + slope_j * x_j with strictly positive slopes.
struct ParallelLinkSystem {
  std::vector<double> offsets;
  std::vector<double> slopes;
  double demand = 1.0;

  ParallelLinkSystem(std::vector<double> offsets_in, std::vector<double> slopes_in,
                     double demand_in = 1.0)
      : offsets(std::move(offsets_in)), slopes(std::move(slopes_in)), demand(demand_in) {
    if (offsets.size() != slopes.size())
      throw dimension_error("offsets and slopes differ in length");
    if (offsets.size() < 2) throw invalid_structure("at least two links required");
    for (double s : slopes)
      if (!(s > 0.0)) throw invalid_structure("slopes must be strictly positive");
    if (!(demand > 0.0)) throw invalid_structure("demand must be positive");
  }

  std::size_t size() const { return offsets.size(); }
  double cost(std::size_t j, double load) const { return offsets[j] + slopes[j] * load; }
};

inline CongestionNetwork to_network(const ParallelLinkSystem& system) {
  std::vector<AffineLink> links;
  std::vector<std::vector<std::size_t>> paths;
  for (std::size_t j = 0; j < system.size(); ++j) {
    links.push_back(AffineLink{system.offsets[j], system.slopes[j]});
    paths.push_back({j});
  }
  return CongestionNetwork(std::move(links), {Commodity{system.demand, std::move(paths)}});
}

struct FlowProfile {
  std::vector<double> flows;
  std::vector<std::size_t> support;  // indices with positive flow
};

namespace detail {

inline void check_flow(const ParallelLinkSystem& system, std::span<const double> flow) {
  if (flow.size() != system.size()) throw dimension_error("flow has wrong dimension");
  double sum = 0.0;
  for (double v : flow) {
    if (!(v >= 0.0)) throw invalid_state("flows must be nonnegative");
    sum += v;
  }
  if (std::abs(sum - system.demand) > kMassTolerance)
    throw invalid_state("flow does not carry the demand");
}

inline std::vector<std::size_t> support_of(std::span<const double> flow) {
  std::vector<std::size_t> s;
  for (std::size_t j = 0; j < flow.size(); ++j)
    if (flow[j] > 0.0) s.push_back(j);
  return s;
}

}  // namespace detail

/// Equal-delay active-set solve: start from all links, drop any link whose
/// solved flow is negative, repeat. The common delay only decreases when a
/// link is dropped, so dropped links stay correctly priced out; at most m
/// rounds. Existence and uniqueness hold because slopes are positive.
inline FlowProfile wardrop_parallel_affine(const ParallelLinkSystem& system) {
  const std::size_t m = system.size();
  std::vector<bool> active(m, true);
  std::vector<double> x(m, 0.0);
  for (std::size_t round = 0; round <= m; ++round) {
    double num = system.demand, den = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      if (active[j]) {
        num += system.offsets[j] / system.slopes[j];
        den += 1.0 / system.slopes[j];
      }
    const double delay = num / den;
    bool dropped = false;
    for (std::size_t j = 0; j < m; ++j) {
      if (!active[j]) {
        x[j] = 0.0;
        continue;
      }
      x[j] = (delay - system.offsets[j]) / system.slopes[j];
      if (x[j] < 0.0) {
        active[j] = false;
        dropped = true;
      }
    }
    if (!dropped) break;
  }
  return FlowProfile{x, detail::support_of(x)};
}

/// Closed-form full-support solution (elementary symmetric ratio); kept as
/// an independent route against the active-set solver.
inline std::vector<double> wardrop_full_support_closed_form(const ParallelLinkSystem& system) {
  const std::size_t m = system.size();
  const auto& rho = system.offsets;
  const auto& sig = system.slopes;
  double prod = 1.0;
  for (double s : sig) prod *= s;
  double denom = 0.0;
  for (std::size_t i = 0; i < m; ++i) denom += prod / sig[i];
  std::vector<double> x(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    double num = system.demand * prod / sig[j];
    for (std::size_t i = 0; i < m; ++i)
      if (i != j) num += (rho[i] - rho[j]) * prod / (sig[i] * sig[j]);
    x[j] = num / denom;
  }
  return x;
}

namespace detail {

inline void require_unit_demand(const ParallelLinkSystem& system, const char* who) {
  if (std::abs(system.demand - 1.0) > kMassTolerance)
    throw domain_error(std::string(who) + " is derived for unit demand");
}

}  // namespace detail

/// Jacobian of the hedge map at a full-support fixed point of a unit-demand
/// parallel system. Its columns sum to zero, so 0 is always an eigenvalue.
inline Eigen::MatrixXd jacobian_full_support(const ParallelLinkSystem& system,
                                             std::span<const double> flow, double alpha) {
  detail::require_unit_demand(system, "the full-support Jacobian");
  detail::check_flow(system, flow);
  const auto m = static_cast<Eigen::Index>(system.size());
  for (double v : flow)
    if (!(v > 0.0))
      throw domain_error(
          "flow has partial support; use classify_partial_support for the block form");
  Eigen::MatrixXd j(m, m);
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index c = 0; c < m; ++c) {
      const auto i = static_cast<std::size_t>(r);
      const auto k = static_cast<std::size_t>(c);
      if (r == c)
        j(r, c) = (1.0 - alpha * flow[i] * system.slopes[i]) * (1.0 - flow[i]);
      else
        j(r, c) = -flow[i] * (1.0 - alpha * flow[k] * system.slopes[k]);
    }
  return j;
}

struct DeflatedSystem {
  Eigen::MatrixXd matrix;                // (m-1) x (m-1)
  std::vector<std::size_t> permutation;  // link order used; front has max offset
};

namespace detail {

inline std::vector<std::size_t> offset_descending_order(const ParallelLinkSystem& system) {
  std::vector<std::size_t> order(system.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return system.offsets[a] > system.offsets[b];
  });
  return order;
}

}  // namespace detail

/// Deflation of the full-support Jacobian: removes the structural zero
/// eigenvalue. Links are reordered internally so the largest offset leads
/// (the permutation is reported); with that ordering the matrix is
/// entrywise nonnegative for alpha up to alpha_bar.
inline DeflatedSystem deflated_k(const ParallelLinkSystem& system,
                                 std::span<const double> flow, double alpha) {
  detail::require_unit_demand(system, "deflation");
  detail::check_flow(system, flow);
  for (double v : flow)
    if (!(v > 0.0)) throw domain_error("deflation requires a full-support flow");
  const auto order = detail::offset_descending_order(system);
  const std::size_t m = system.size();
  Eigen::MatrixXd k(static_cast<Eigen::Index>(m - 1), static_cast<Eigen::Index>(m - 1));
  const double rho1 = system.offsets[order[0]];
  for (std::size_t r = 0; r < m - 1; ++r) {
    const std::size_t link = order[r + 1];
    const double xr = flow[link];
    for (std::size_t c = 0; c < m - 1; ++c) {
      if (r == c)
        k(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            1.0 - alpha * xr * (system.slopes[link] + system.offsets[link] - rho1);
      else
        k(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            alpha * xr * (rho1 - system.offsets[link]);
    }
  }
  return DeflatedSystem{std::move(k), order};
}

/// Largest learning rate keeping the deflated matrix entrywise nonnegative:
/// min over non-leading links of 1 / (x_j (slope_j + offset_j - offset_1)).
inline double alpha_bar(const ParallelLinkSystem& system, std::span<const double> flow) {
  detail::require_unit_demand(system, "alpha_bar");
  detail::check_flow(system, flow);
  for (double v : flow)
    if (!(v > 0.0)) throw domain_error("alpha_bar requires a full-support flow");
  const auto order = detail::offset_descending_order(system);
  const double rho1 = system.offsets[order[0]];
  double bound = std::numeric_limits<double>::infinity();
  for (std::size_t r = 1; r < system.size(); ++r) {
    const std::size_t link = order[r];
    const double term = flow[link] * (system.slopes[link] + system.offsets[link] - rho1);
    if (!(term > 0.0))
      throw domain_error("flow is not a full-support equilibrium of this system");
    bound = std::min(bound, 1.0 / term);
  }
  return bound;
}

inline double spectral_radius(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() != matrix.cols()) throw dimension_error("matrix must be square");
  if (matrix.rows() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(matrix, /*computeEigenvectors=*/false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

enum class StabilityVerdict { stable, unstable, inconclusive };

inline const char* to_string(StabilityVerdict v) {
  switch (v) {
    case StabilityVerdict::stable: return "stable";
    case StabilityVerdict::unstable: return "unstable";
    default: return "inconclusive";
  }
}

inline constexpr double kStabilityMargin = 1e-9;

inline StabilityVerdict verdict_from_radius(double rho) {
  if (rho < 1.0 - kStabilityMargin) return StabilityVerdict::stable;
  if (rho > 1.0 + kStabilityMargin) return StabilityVerdict::unstable;
  return StabilityVerdict::inconclusive;
}

namespace detail {

inline ParallelLinkSystem subsystem(const ParallelLinkSystem& system,
                                    const std::vector<std::size_t>& links, double demand) {
  std::vector<double> rho, sig;
  for (auto j : links) {
    rho.push_back(system.offsets[j]);
    sig.push_back(system.slopes[j]);
  }
  return ParallelLinkSystem(std::move(rho), std::move(sig), demand);
}

struct BlockSpectrum {
  double rho = 0.0;                // spectral radius over all blocks except the deflated zero
  bool off_support_cheaper = false;
  bool off_support_tied = false;
};

inline BlockSpectrum block_spectrum(const ParallelLinkSystem& system,
                                    std::span<const double> flow, double alpha, double tol) {
  require_unit_demand(system, "stability classification");
  check_flow(system, flow);
  const auto support = support_of(flow);
  if (support.empty()) throw domain_error("flow has empty support");

  double delay_lo = std::numeric_limits<double>::infinity();
  double delay_hi = -std::numeric_limits<double>::infinity();
  for (auto j : support) {
    const double d = system.cost(j, flow[j]);
    delay_lo = std::min(delay_lo, d);
    delay_hi = std::max(delay_hi, d);
  }
  if (delay_hi - delay_lo > tol)
    throw domain_error("flow is not a fixed point: supported delays differ");
  const double delay = 0.5 * (delay_lo + delay_hi);

  BlockSpectrum out;
  for (std::size_t j = 0; j < system.size(); ++j) {
    if (flow[j] > 0.0) continue;
    const double at_zero = system.cost(j, 0.0);
    if (at_zero < delay - tol)
      out.off_support_cheaper = true;
    else if (at_zero <= delay + tol)
      out.off_support_tied = true;
    out.rho = std::max(out.rho, std::exp(-alpha * (at_zero - delay)));
  }

  if (support.size() == static_cast<std::size_t>(system.size())) {
    out.rho = std::max(out.rho, spectral_radius(deflated_k(system, flow, alpha).matrix));
  } else if (support.size() >= 2) {
    auto sub = subsystem(system, support, 1.0);
    std::vector<double> sub_flow;
    for (auto j : support) sub_flow.push_back(flow[j]);
    out.rho = std::max(out.rho, spectral_radius(deflated_k(sub, sub_flow, alpha).matrix));
  }
  // A single supported link contributes the block (1 - alpha x c')(1 - x) = 0.
  return out;
}

}  // namespace detail

/// Stability trichotomy at a hedge fixed point: an unused link cheaper than
/// the common delay makes the point unstable; a tie leaves the linear test
/// inconclusive; otherwise the verdict is the supported block's.
inline StabilityVerdict classify_partial_support(const ParallelLinkSystem& system,
                                                 std::span<const double> flow, double alpha,
                                                 double tol = 1e-9) {
  const auto blocks = detail::block_spectrum(system, flow, alpha, tol);
  if (blocks.off_support_cheaper) return StabilityVerdict::unstable;
  if (blocks.off_support_tied) return StabilityVerdict::inconclusive;
  return verdict_from_radius(blocks.rho);
}

/// The hedge map reduced to the first link's load for two-link unit-demand
/// systems. Evaluated in ratio form so large exponents saturate instead of
/// producing 0/0.
struct HedgeScalarMap {
  ParallelLinkSystem system;
  double alpha = 0.0;

  double operator()(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double exponent = alpha * (system.cost(1, 1.0 - x) - system.cost(0, x));
    if (exponent > 700.0) return 1.0;
    if (exponent < -700.0) return 0.0;
    return x / (x + (1.0 - x) * std::exp(-exponent));
  }
};

inline HedgeScalarMap hedge_scalar_map(const ParallelLinkSystem& system, double alpha) {
  if (system.size() != 2) throw domain_error("scalar reduction needs exactly two links");
  detail::require_unit_demand(system, "the scalar hedge map");
  return HedgeScalarMap{system, alpha};
}

struct PeriodicOrbit {
  int period = 1;
  std::vector<double> points;  // sorted ascending
};

/// Grid scan of map^p(x) - x over [0, 1] with bisection on every sign
/// change; exact zeros at grid nodes (the absorbing endpoints in
/// particular) are kept as roots. Roots are merged within 10 tol, grouped
/// into orbits, and only orbits of minimal period p are returned.
template <class Map>
std::vector<PeriodicOrbit> find_periodic_orbits(const Map& map, int period, int grid_n,
                                                double tol) {
  if (period < 1) throw domain_error("period must be at least 1");
  if (grid_n < 10) throw domain_error("grid too coarse");
  if (!(tol > 0.0)) throw domain_error("tol must be positive");

  auto iterate = [&](double x, int times) {
    for (int i = 0; i < times; ++i) x = map(x);
    return x;
  };
  auto phi = [&](double x) { return iterate(x, period) - x; };

  std::vector<double> roots;
  std::vector<double> node_phi(static_cast<std::size_t>(grid_n) + 1);
  for (int i = 0; i <= grid_n; ++i) {
    const double x = static_cast<double>(i) / grid_n;
    node_phi[static_cast<std::size_t>(i)] = phi(x);
    if (node_phi[static_cast<std::size_t>(i)] == 0.0) roots.push_back(x);
  }
  for (int i = 0; i < grid_n; ++i) {
    const double fa = node_phi[static_cast<std::size_t>(i)];
    const double fb = node_phi[static_cast<std::size_t>(i) + 1];
    if (fa == 0.0 || fb == 0.0 || (fa < 0.0) == (fb < 0.0)) continue;
    double lo = static_cast<double>(i) / grid_n;
    double hi = static_cast<double>(i + 1) / grid_n;
    double flo = fa;
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      const double fm = phi(mid);
      if (fm == 0.0) {
        lo = hi = mid;
        break;
      }
      if ((fm < 0.0) == (flo < 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    roots.push_back(0.5 * (lo + hi));
  }

  std::sort(roots.begin(), roots.end());
  std::vector<double> unique_roots;
  for (double r : roots)
    if (unique_roots.empty() || r - unique_roots.back() > 10.0 * tol)
      unique_roots.push_back(r);

  const double match_tol = 10.0 * tol;
  std::vector<bool> used(unique_roots.size(), false);
  std::vector<PeriodicOrbit> orbits;
  for (std::size_t i = 0; i < unique_roots.size(); ++i) {
    if (used[i]) continue;
    const double r = unique_roots[i];
    int minimal = period;
    double x = r;
    for (int d = 1; d <= period; ++d) {
      x = map(x);
      if (period % d == 0 && std::abs(x - r) <= match_tol) {
        minimal = d;
        break;
      }
    }
    std::vector<double> points{r};
    x = r;
    for (int d = 1; d < minimal; ++d) {
      x = map(x);
      points.push_back(x);
    }
    for (double p : points)
      for (std::size_t j = 0; j < unique_roots.size(); ++j)
        if (std::abs(unique_roots[j] - p) <= match_tol) used[j] = true;
    if (minimal == period) {
      std::sort(points.begin(), points.end());
      orbits.push_back(PeriodicOrbit{period, std::move(points)});
    }
  }
  return orbits;
}

// ---------------------------------------------------------------------------
// Congestion potentials, mixed costs, and the dominance calculus.
// ---------------------------------------------------------------------------

namespace detail {

inline void check_network_flow(const CongestionNetwork& network, std::span<const double> flow) {
  if (flow.size() != network.path_count()) throw dimension_error("flow has wrong dimension");
  std::size_t k = 0;
  for (const auto& c : network.commodities()) {
    double sum = 0.0;
    for (std::size_t p = 0; p < c.paths.size(); ++p) {
      if (!(flow[k] >= 0.0)) throw invalid_state("flows must be nonnegative");
      sum += flow[k++];
    }
    if (std::abs(sum - c.demand) > kMassTolerance)
      throw invalid_state("flow does not carry the commodity demand");
  }
}

inline void check_pair(const CongestionNetwork& network, std::span<const double> x,
                       std::span<const double> y) {
  check_network_flow(network, x);
  check_network_flow(network, y);
  double gap = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) gap = std::max(gap, std::abs(x[k] - y[k]));
  if (gap <= 1e-12) throw degenerate_pair_error("flows are identical");
}

}  // namespace detail

/// Demand-conservation and nonnegativity check for a per-path flow vector.
inline void validate_network_flow(const CongestionNetwork& network,
                                  std::span<const double> flow) {
  detail::check_network_flow(network, flow);
}

// The potential is a function of the link loads alone, so partial flows
// (including the empty one) are accepted.
inline double beckmann_potential(const CongestionNetwork& network,
                                 std::span<const double> flow) {
  for (double v : flow)
    if (!(v >= 0.0)) throw invalid_state("flows must be nonnegative");
  const auto loads = network.link_loads(flow);
  double acc = 0.0;
  for (std::size_t e = 0; e < loads.size(); ++e)
    acc += network.links()[e].cost_integral(loads[e]);
  return acc;
}

inline double beckmann_potential(const ParallelLinkSystem& system,
                                 std::span<const double> flow) {
  if (flow.size() != system.size()) throw dimension_error("flow has wrong dimension");
  double acc = 0.0;
  for (std::size_t j = 0; j < system.size(); ++j) {
    if (!(flow[j] >= 0.0)) throw invalid_state("flows must be nonnegative");
    acc += system.offsets[j] * flow[j] + 0.5 * system.slopes[j] * flow[j] * flow[j];
  }
  return acc;
}

/// c(x|z): cost of routing x against the loads induced by z.
inline double mixed_cost(const CongestionNetwork& network, std::span<const double> x,
                         std::span<const double> z) {
  detail::check_network_flow(network, x);
  detail::check_network_flow(network, z);
  const auto lx = network.link_loads(x);
  const auto lz = network.link_loads(z);
  double acc = 0.0;
  for (std::size_t e = 0; e < lx.size(); ++e) acc += network.links()[e].cost(lz[e]) * lx[e];
  return acc;
}

/// delta(eps | x, y) = c(x | (1-eps)x + eps y) - c(y | (1-eps)x + eps y);
/// strictly decreasing in eps when all link costs strictly increase.
inline double delta_epsilon(const CongestionNetwork& network, std::span<const double> x,
                            std::span<const double> y, double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw domain_error("eps must lie in [0, 1]");
  detail::check_pair(network, x, y);
  const auto lx = network.link_loads(x);
  const auto ly = network.link_loads(y);
  double acc = 0.0;
  for (std::size_t e = 0; e < lx.size(); ++e) {
    const double blended = (1.0 - eps) * lx[e] + eps * ly[e];
    acc += network.links()[e].cost(blended) * (lx[e] - ly[e]);
  }
  return acc;
}

inline constexpr double kDominanceMargin = 1e-12;

/// y invades x when a y-routed packet beats the x-routed incumbents at the
/// incumbent loads.
inline bool invades(const CongestionNetwork& network, std::span<const double> y,
                    std::span<const double> x) {
  return delta_epsilon(network, x, y, 0.0) > kDominanceMargin;
}

/// Mutant-share threshold at which an invasion by y against x stalls: the
/// root of delta(. | x, y) in [0, 1]. Returns 1 when delta(0) <= 0 (x
/// dominates y; the barrier is "infinite") and 0 when delta stays positive
/// on the whole interval.
inline double invasion_barrier(const CongestionNetwork& network, std::span<const double> y,
                               std::span<const double> x, int grid_n = 100) {
  if (grid_n < 2) throw domain_error("grid too coarse");
  if (delta_epsilon(network, x, y, 0.0) <= kDominanceMargin) return 1.0;
  double prev_eps = 0.0;
  for (int i = 1; i <= grid_n; ++i) {
    const double eps = static_cast<double>(i) / grid_n;
    if (delta_epsilon(network, x, y, eps) <= 0.0) {
      double lo = prev_eps, hi = eps;
      while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (delta_epsilon(network, x, y, mid) > 0.0)
          lo = mid;
        else
          hi = mid;
      }
      return 0.5 * (lo + hi);
    }
    prev_eps = eps;
  }
  return 0.0;
}

/// x never does worse than the incumbent y at any adoption level.
inline bool is_incrementally_deployable(const CongestionNetwork& network,
                                        std::span<const double> x, std::span<const double> y,
                                        int grid_n = 100) {
  if (grid_n < 2) throw domain_error("grid too coarse");
  detail::check_pair(network, x, y);
  const auto lx = network.link_loads(x);
  const auto ly = network.link_loads(y);
  for (int i = 0; i <= grid_n; ++i) {
    const double eps = static_cast<double>(i) / grid_n;
    double diff = 0.0;
    for (std::size_t e = 0; e < lx.size(); ++e) {
      const double blended = (1.0 - eps) * ly[e] + eps * lx[e];
      diff += network.links()[e].cost(blended) * (lx[e] - ly[e]);
    }
    if (diff > kDominanceMargin) return false;
  }
  return true;
}

inline bool dominates(const CongestionNetwork& network, std::span<const double> x,
                      std::span<const double> y, int grid_n = 100) {
  return invasion_barrier(network, y, x, grid_n) >= 1.0;
}

// ---------------------------------------------------------------------------
// Reports.
// ---------------------------------------------------------------------------

struct RoutingReport {
  std::vector<double> wardrop;
  std::optional<double> alpha_bar;  // absent for single-link support
  double alpha = 0.0;
  double spectral_radius = 0.0;
  StabilityVerdict verdict = StabilityVerdict::inconclusive;
  std::vector<PeriodicOrbit> orbits;  // populated for two-link unit-demand systems
};

inline RoutingReport analyze_parallel_system(const ParallelLinkSystem& system, double alpha,
                                             double tol = 1e-9) {
  detail::require_unit_demand(system, "routing analysis");
  RoutingReport report;
  report.alpha = alpha;
  const auto wardrop = wardrop_parallel_affine(system);
  report.wardrop = wardrop.flows;

  const auto blocks = detail::block_spectrum(system, wardrop.flows, alpha, tol);
  report.spectral_radius = blocks.rho;
  report.verdict = classify_partial_support(system, wardrop.flows, alpha, tol);
  if (wardrop.support.size() == system.size()) {
    report.alpha_bar = alpha_bar(system, wardrop.flows);
  } else if (wardrop.support.size() >= 2) {
    auto sub = detail::subsystem(system, wardrop.support, 1.0);
    std::vector<double> sub_flow;
    for (auto j : wardrop.support) sub_flow.push_back(wardrop.flows[j]);
    report.alpha_bar = alpha_bar(sub, sub_flow);
  }
  if (system.size() == 2) {
    const auto map = hedge_scalar_map(system, alpha);
    for (int p : {1, 2, 3})
      for (auto& orbit : find_periodic_orbits(map, p, 4000, 1e-12))
        report.orbits.push_back(std::move(orbit));
  }
  return report;
}

inline std::string routing_report_to_json(const RoutingReport& report) {
  std::ostringstream os;
  os << "{\"wardrop\": [";
  for (std::size_t j = 0; j < report.wardrop.size(); ++j) {
    if (j) os << ", ";
    os << format17(report.wardrop[j]);
  }
  os << "], \"alpha_bar\": ";
  if (report.alpha_bar)
    os << format17(*report.alpha_bar);
  else
    os << "null";
  os << ", \"spectral_radius_at\": {\"alpha\": " << format17(report.alpha)
     << ", \"rho\": " << format17(report.spectral_radius) << "}, \"verdict\": \""
     << to_string(report.verdict) << "\", \"orbits\": [";
  for (std::size_t i = 0; i < report.orbits.size(); ++i) {
    if (i) os << ", ";
    os << "{\"period\": " << report.orbits[i].period << ", \"points\": [";
    for (std::size_t k = 0; k < report.orbits[i].points.size(); ++k) {
      if (k) os << ", ";
      os << format17(report.orbits[i].points[k]);
    }
    os << "]}";
  }
  os << "]}";
  return os.str();
}

struct ChaosScanRow {
  double alpha = 0.0;
  std::vector<std::pair<int, std::size_t>> orbit_counts;  // (period, count)
};

inline std::vector<ChaosScanRow> chaos_scan(const ParallelLinkSystem& system,
                                            std::span<const double> alphas,
                                            std::span<const int> periods, int grid_n = 20000,
                                            double tol = 1e-12) {
  std::vector<ChaosScanRow> rows;
  for (double alpha : alphas) {
    const auto map = hedge_scalar_map(system, alpha);
    ChaosScanRow row;
    row.alpha = alpha;
    for (int p : periods)
      row.orbit_counts.emplace_back(p, find_periodic_orbits(map, p, grid_n, tol).size());
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_chaos_scan_csv(std::ostream& os, std::span<const ChaosScanRow> rows) {
  if (rows.empty()) throw domain_error("empty scan");
  os << "alpha";
  for (const auto& [p, count] : rows.front().orbit_counts) os << ",n_period" << p;
  os << "\n";
  for (const auto& row : rows) {
    os << format17(row.alpha);
    for (const auto& [p, count] : row.orbit_counts) os << ',' << count;
    os << '\n';
  }
}

}  // namespace mwdyn
