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

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <complex>

#include "mwdyn/analysis.hpp"
#include "mwdyn/dynamics.hpp"
#include "mwdyn/random.hpp"
#include "mwdyn/routing.hpp"

using namespace mwdyn;
using Catch::Matchers::WithinAbs;

namespace {

ParallelLinkSystem paper_system() { return ParallelLinkSystem({0.0, 0.0}, {1.0, 10.0}); }

/// Full-support random systems kept away from degenerate flows so the
/// eigenvalue comparisons stay well conditioned.
ParallelLinkSystem random_full_support_system(Rng& rng, std::size_t m) {
  for (;;) {
    std::vector<double> rho(m), sig(m);
    for (auto& r : rho) r = rng.uniform(0.0, 0.2);
    for (auto& s : sig) s = rng.uniform(0.5, 3.0);
    ParallelLinkSystem system(rho, sig);
    auto w = wardrop_parallel_affine(system);
    double lo = 1.0;
    for (double x : w.flows) lo = std::min(lo, x);
    if (lo >= 0.03) return system;
  }
}

double greedy_match_gap(Eigen::VectorXcd a, std::vector<std::complex<double>> b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < b.size(); ++j)
      if (std::abs(b[j] - a[i]) < std::abs(b[best] - a[i])) best = j;
    worst = std::max(worst, std::abs(b[best] - a[i]));
    b.erase(b.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return worst;
}

}  // namespace

TEST_CASE("wardrop equilibria of parallel affine systems") {
  auto w = wardrop_parallel_affine(paper_system());
  CHECK_THAT(w.flows[0], WithinAbs(10.0 / 11.0, 1e-12));
  CHECK_THAT(w.flows[1], WithinAbs(1.0 / 11.0, 1e-12));
  CHECK(w.support.size() == 2);

  auto symmetric = wardrop_parallel_affine(ParallelLinkSystem({0.0, 0.0}, {1.0, 1.0}));
  CHECK_THAT(symmetric.flows[0], WithinAbs(0.5, 1e-15));
  CHECK_THAT(symmetric.flows[1], WithinAbs(0.5, 1e-15));

  auto partial = wardrop_parallel_affine(ParallelLinkSystem({0.0, 5.0}, {1.0, 1.0}));
  CHECK_THAT(partial.flows[0], WithinAbs(1.0, 1e-15));
  CHECK(partial.flows[1] == 0.0);
  CHECK(partial.support == std::vector<std::size_t>{0});
}

TEST_CASE("active-set solver agrees with the closed form") {
  Rng rng(61);
  for (int trial = 0; trial < 100; ++trial) {
    auto system = random_full_support_system(rng, 2 + rng.index(7));
    auto w = wardrop_parallel_affine(system);
    auto closed = wardrop_full_support_closed_form(system);
    for (std::size_t j = 0; j < system.size(); ++j)
      CHECK_THAT(w.flows[j], WithinAbs(closed[j], 1e-9));
  }
}

TEST_CASE("full-support jacobian") {
  auto system = paper_system();
  std::vector<double> x{10.0 / 11.0, 1.0 / 11.0};
  auto j = jacobian_full_support(system, x, 0.0);
  CHECK_THAT(j(0, 0), WithinAbs(1.0 / 11.0, 1e-12));
  CHECK_THAT(j(0, 1), WithinAbs(-10.0 / 11.0, 1e-12));
  CHECK_THAT(j(1, 0), WithinAbs(-1.0 / 11.0, 1e-12));
  CHECK_THAT(j(1, 1), WithinAbs(10.0 / 11.0, 1e-12));

  Rng rng(67);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = random_full_support_system(rng, 2 + rng.index(7));
    auto w = wardrop_parallel_affine(s);
    auto jac = jacobian_full_support(s, w.flows, rng.uniform(0.0, 2.0));
    for (Eigen::Index c = 0; c < jac.cols(); ++c)
      CHECK_THAT(jac.col(c).sum(), WithinAbs(0.0, 1e-12));
  }

  std::vector<double> partial{1.0, 0.0};
  CHECK_THROWS_AS(jacobian_full_support(system, partial, 0.5), domain_error);
  ParallelLinkSystem heavy({0.0, 0.0}, {1.0, 10.0}, 2.0);
  std::vector<double> two{20.0 / 11.0, 2.0 / 11.0};
  CHECK_THROWS_AS(jacobian_full_support(heavy, two, 0.5), domain_error);
}

TEST_CASE("deflated matrix") {
  auto system = paper_system();
  std::vector<double> x{10.0 / 11.0, 1.0 / 11.0};
  auto d = deflated_k(system, x, 0.5);
  REQUIRE(d.matrix.rows() == 1);
  CHECK_THAT(d.matrix(0, 0), WithinAbs(6.0 / 11.0, 1e-12));

  // Equal offsets make the deflation diagonal.
  ParallelLinkSystem flat({0.3, 0.3, 0.3}, {1.0, 2.0, 3.0});
  auto w = wardrop_parallel_affine(flat);
  auto k = deflated_k(flat, w.flows, 0.7);
  for (Eigen::Index r = 0; r < k.matrix.rows(); ++r)
    for (Eigen::Index c = 0; c < k.matrix.cols(); ++c)
      if (r != c) CHECK_THAT(k.matrix(r, c), WithinAbs(0.0, 1e-15));

  // alpha = 0 gives the identity.
  auto id = deflated_k(flat, w.flows, 0.0);
  CHECK((id.matrix - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);

  // Unsorted offsets are reordered internally; the permutation is reported.
  ParallelLinkSystem unsorted({0.0, 0.4, 0.2}, {1.0, 1.0, 1.0});
  auto wu = wardrop_parallel_affine(unsorted);
  auto du = deflated_k(unsorted, wu.flows, 0.3);
  CHECK(du.permutation == std::vector<std::size_t>{1, 2, 0});
  CHECK(du.matrix.minCoeff() >= 0.0);
}

TEST_CASE("alpha_bar") {
  auto system = paper_system();
  std::vector<double> x{10.0 / 11.0, 1.0 / 11.0};
  CHECK_THAT(alpha_bar(system, x), WithinAbs(1.1, 1e-12));

  ParallelLinkSystem symmetric({0.0, 0.0}, {1.0, 1.0});
  std::vector<double> half{0.5, 0.5};
  CHECK_THAT(alpha_bar(symmetric, half), WithinAbs(2.0, 1e-12));

  std::vector<double> partial{1.0, 0.0};
  CHECK_THROWS_AS(alpha_bar(system, partial), domain_error);

  Rng rng(71);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = random_full_support_system(rng, 2 + rng.index(7));
    auto w = wardrop_parallel_affine(s);
    auto bar = alpha_bar(s, w.flows);
    CHECK(bar > 0.0);
    auto k = deflated_k(s, w.flows, bar);
    CHECK(k.matrix.minCoeff() >= -1e-12);
  }
}

TEST_CASE("spectral radius") {
  Eigen::MatrixXd one(1, 1);
  one << 6.0 / 11.0;
  CHECK_THAT(spectral_radius(one), WithinAbs(6.0 / 11.0, 1e-15));

  Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(2, 2);
  diag(0, 0) = 0.2;
  diag(1, 1) = -0.9;
  CHECK_THAT(spectral_radius(diag), WithinAbs(0.9, 1e-12));

  Eigen::MatrixXd rotation(2, 2);
  rotation << 0.0, -1.0, 1.0, 0.0;
  CHECK_THAT(spectral_radius(rotation), WithinAbs(1.0, 1e-12));

  Eigen::MatrixXd rect(2, 3);
  CHECK_THROWS_AS(spectral_radius(rect), dimension_error);
}

TEST_CASE("deflation preserves the jacobian spectrum") {
  Rng rng(73);
  for (int trial = 0; trial < 100; ++trial) {
    auto system = random_full_support_system(rng, 2 + rng.index(7));
    auto w = wardrop_parallel_affine(system);
    const double bar = alpha_bar(system, w.flows);
    const double alpha = rng.uniform(0.05, 1.0) * bar;
    auto j = jacobian_full_support(system, w.flows, alpha);
    auto k = deflated_k(system, w.flows, alpha);
    Eigen::EigenSolver<Eigen::MatrixXd> js(j, false);
    Eigen::EigenSolver<Eigen::MatrixXd> ks(k.matrix, false);
    std::vector<std::complex<double>> expected{ks.eigenvalues().data(),
                                               ks.eigenvalues().data() + ks.eigenvalues().size()};
    expected.emplace_back(0.0, 0.0);
    CHECK(greedy_match_gap(js.eigenvalues(), expected) < 1e-9);
  }
}

TEST_CASE("no unit eigenvalue for any learning rate") {
  Rng rng(79);
  for (int trial = 0; trial < 30; ++trial) {
    auto system = random_full_support_system(rng, 2 + rng.index(7));
    auto w = wardrop_parallel_affine(system);
    for (double alpha : {0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
      auto k = deflated_k(system, w.flows, alpha);
      const Eigen::MatrixXd shifted =
          k.matrix - Eigen::MatrixXd::Identity(k.matrix.rows(), k.matrix.cols());
      CHECK(std::abs(shifted.determinant()) > 0.0);
    }
  }
}

TEST_CASE("partial support trichotomy") {
  // Unused link strictly worse than the common delay: verdict from the block.
  ParallelLinkSystem stable_sys({0.0, 5.0}, {1.0, 1.0});
  std::vector<double> x{1.0, 0.0};
  CHECK(classify_partial_support(stable_sys, x, 0.1) == StabilityVerdict::stable);

  // Unused link strictly cheaper: unstable fixed point (not Wardrop).
  ParallelLinkSystem unstable_sys({0.0, 0.5}, {1.0, 1.0});
  CHECK(classify_partial_support(unstable_sys, x, 0.1) == StabilityVerdict::unstable);
  CHECK(classify_partial_support(unstable_sys, x, 2.0) == StabilityVerdict::unstable);

  // Exact tie: inconclusive.
  ParallelLinkSystem tied({0.0, 1.0}, {1.0, 1.0});
  CHECK(classify_partial_support(tied, x, 0.5) == StabilityVerdict::inconclusive);

  // Non-fixed flows are rejected.
  ParallelLinkSystem sys = paper_system();
  std::vector<double> moving{0.5, 0.5};
  CHECK_THROWS_AS(classify_partial_support(sys, moving, 0.5), domain_error);
}

TEST_CASE("scalar hedge map") {
  auto map = hedge_scalar_map(paper_system(), 5.0);
  CHECK(map(0.0) == 0.0);
  CHECK(map(1.0) == 1.0);
  CHECK_THAT(map(10.0 / 11.0), WithinAbs(10.0 / 11.0, 1e-12));
  for (int i = 1; i < 1000; ++i) {
    const double x = i / 1000.0;
    const double y = map(x);
    CHECK(y > 0.0);
    CHECK(y <= 1.0);  // at this rate the image rounds onto 1 where the
                      // slow-link term underflows past one ulp
  }
  // With a moderate rate the interior maps strictly into the interior.
  auto gentle = hedge_scalar_map(paper_system(), 1.0);
  for (int i = 1; i < 1000; ++i) {
    const double y = gentle(i / 1000.0);
    CHECK(y > 0.0);
    CHECK(y < 1.0);
  }
  ParallelLinkSystem three({0.0, 0.0, 0.0}, {1.0, 2.0, 3.0});
  CHECK_THROWS_AS(hedge_scalar_map(three, 1.0), domain_error);
}

TEST_CASE("periodic orbit scan") {
  auto map5 = hedge_scalar_map(paper_system(), 5.0);
  auto fixed = find_periodic_orbits(map5, 1, 20000, 1e-12);
  REQUIRE(fixed.size() == 3);
  CHECK_THAT(fixed[0].points[0], WithinAbs(0.0, 1e-12));
  CHECK_THAT(fixed[1].points[0], WithinAbs(10.0 / 11.0, 1e-10));
  CHECK_THAT(fixed[2].points[0], WithinAbs(1.0, 1e-12));

  auto period3 = find_periodic_orbits(map5, 3, 20000, 1e-12);
  CHECK(period3.size() >= 1);
  for (const auto& orbit : period3) {
    REQUIRE(orbit.points.size() == 3);
    // Genuinely period three: not a relabeled fixed point.
    for (double p : orbit.points) CHECK(std::abs(map5(p) - p) > 1e-6);
    double x = orbit.points[0];
    for (int i = 0; i < 3; ++i) x = map5(x);
    CHECK_THAT(x, WithinAbs(orbit.points[0], 1e-9));
  }

  auto map01 = hedge_scalar_map(paper_system(), 0.1);
  CHECK(find_periodic_orbits(map01, 3, 20000, 1e-12).empty());
  auto tame = find_periodic_orbits(map01, 1, 20000, 1e-12);
  REQUIRE(tame.size() == 3);
  CHECK_THAT(tame[1].points[0], WithinAbs(10.0 / 11.0, 1e-10));

  CHECK_THROWS_AS(find_periodic_orbits(map5, 3, 5, 1e-12), domain_error);
}

TEST_CASE("beckmann potential") {
  auto system = paper_system();
  std::vector<double> half{0.5, 0.5};
  CHECK_THAT(beckmann_potential(system, half), WithinAbs(1.375, 1e-12));
  std::vector<double> w{10.0 / 11.0, 1.0 / 11.0};
  CHECK_THAT(beckmann_potential(system, w), WithinAbs(5.0 / 11.0, 1e-12));

  auto network = to_network(system);
  CHECK_THAT(beckmann_potential(network, w), WithinAbs(5.0 / 11.0, 1e-12));

  CongestionNetwork trivial({AffineLink{1.0, 1.0}}, {Commodity{1.0, {{0}}}});
  std::vector<double> all{1.0};
  CHECK_THAT(beckmann_potential(trivial, all), WithinAbs(1.5, 1e-15));

  std::vector<double> none{0.0, 0.0};
  CHECK(beckmann_potential(system, none) == 0.0);
  CHECK(beckmann_potential(network, none) == 0.0);

  // The Wardrop flow minimizes the potential.
  Rng rng(83);
  const double at_wardrop = beckmann_potential(system, w);
  for (int trial = 0; trial < 1000; ++trial) {
    auto y = rng.dirichlet(2);
    CHECK(beckmann_potential(system, y) + 1e-12 >= at_wardrop);
    double gap = std::max(std::abs(y[0] - w[0]), std::abs(y[1] - w[1]));
    if (gap > 1e-4) CHECK(beckmann_potential(system, y) > at_wardrop);
  }
}

TEST_CASE("mixed cost") {
  auto network = to_network(paper_system());
  std::vector<double> w{10.0 / 11.0, 1.0 / 11.0};
  CHECK_THAT(mixed_cost(network, w, w), WithinAbs(10.0 / 11.0, 1e-12));

  std::vector<double> a{1.0, 0.0}, b{0.0, 1.0};
  CHECK_THAT(mixed_cost(network, a, b), WithinAbs(0.0, 1e-15));

  Rng rng(89);
  for (int trial = 0; trial < 100; ++trial) {
    auto x = rng.dirichlet(2);
    auto y = rng.dirichlet(2);
    auto z = rng.dirichlet(2);
    const double s = rng.uniform01();
    std::vector<double> blend{s * x[0] + (1 - s) * y[0], s * x[1] + (1 - s) * y[1]};
    CHECK_THAT(mixed_cost(network, blend, z),
               WithinAbs(s * mixed_cost(network, x, z) + (1 - s) * mixed_cost(network, y, z),
                         1e-12));
  }
}

TEST_CASE("delta is the closed-form line and strictly decreases") {
  auto network = to_network(paper_system());
  std::vector<double> x{1.0, 0.0}, y{0.0, 1.0};
  CHECK_THAT(delta_epsilon(network, x, y, 0.0), WithinAbs(1.0, 1e-15));
  CHECK_THAT(delta_epsilon(network, x, y, 1.0 / 11.0), WithinAbs(0.0, 1e-12));
  CHECK_THAT(delta_epsilon(network, x, y, 1.0), WithinAbs(-10.0, 1e-12));

  // At the Wardrop flow no direction looks better at epsilon = 0.
  std::vector<double> w{10.0 / 11.0, 1.0 / 11.0};
  Rng rng(97);
  for (int trial = 0; trial < 200; ++trial) {
    auto mutant = rng.dirichlet(2);
    if (std::abs(mutant[0] - w[0]) < 1e-9) continue;
    CHECK(delta_epsilon(network, w, mutant, 0.0) <= 1e-12);
  }

  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 2 + rng.index(4);
    std::vector<double> rho(m), sig(m);
    for (auto& r : rho) r = rng.uniform(0.0, 1.0);
    for (auto& s : sig) s = rng.uniform(0.2, 3.0);
    auto net = to_network(ParallelLinkSystem(rho, sig));
    auto xa = rng.dirichlet(m);
    auto yb = rng.dirichlet(m);
    double prev = delta_epsilon(net, xa, yb, 0.0);
    double scale = std::abs(prev) + 1.0;
    for (int i = 1; i <= 20; ++i) {
      const double value = delta_epsilon(net, xa, yb, i / 20.0);
      CHECK(value - prev < -1e-12 * scale);
      prev = value;
    }
  }

  CHECK_THROWS_AS(delta_epsilon(network, x, x, 0.5), degenerate_pair_error);
  CHECK_THROWS_AS(delta_epsilon(network, x, y, 1.5), domain_error);
}

TEST_CASE("invasion and the invade-or-dominate dichotomy") {
  auto network = to_network(paper_system());
  std::vector<double> x{1.0, 0.0}, y{0.0, 1.0};
  CHECK(invades(network, y, x));

  std::vector<double> w{10.0 / 11.0, 1.0 / 11.0};
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    auto mutant = rng.dirichlet(2);
    if (std::abs(mutant[0] - w[0]) < 1e-9) continue;
    CHECK_FALSE(invades(network, mutant, w));
  }

  // Exactly one of "y invades x" and "x dominates y" on random pairs.
  for (int trial = 0; trial < 200; ++trial) {
    auto a = rng.dirichlet(2);
    auto b = rng.dirichlet(2);
    if (std::abs(a[0] - b[0]) < 1e-9) continue;
    const bool invaded = invades(network, b, a);
    const bool dominant = dominates(network, a, b);
    CHECK(invaded != dominant);
  }
}

TEST_CASE("invasion barrier") {
  auto network = to_network(paper_system());
  std::vector<double> x{1.0, 0.0}, y{0.0, 1.0};
  CHECK_THAT(invasion_barrier(network, y, x), WithinAbs(1.0 / 11.0, 1e-12));

  std::vector<double> w{10.0 / 11.0, 1.0 / 11.0};
  Rng rng(103);
  for (int trial = 0; trial < 200; ++trial) {
    auto mutant = rng.dirichlet(2);
    if (std::abs(mutant[0] - w[0]) < 1e-9) continue;
    CHECK(invasion_barrier(network, mutant, w) == 1.0);
  }

  // A nudge toward the strictly worse link never stalls: barrier zero.
  std::vector<double> nudged{0.99, 0.01};
  CHECK(invasion_barrier(network, nudged, x) == 0.0);
}

TEST_CASE("incremental deployability is dominance") {
  auto network = to_network(paper_system());
  std::vector<double> w{10.0 / 11.0, 1.0 / 11.0};
  std::vector<double> concentrated{1.0, 0.0};
  CHECK(is_incrementally_deployable(network, w, concentrated));
  CHECK_FALSE(is_incrementally_deployable(network, concentrated, w));

  Rng rng(107);
  for (int trial = 0; trial < 300; ++trial) {
    auto a = rng.dirichlet(2);
    auto b = rng.dirichlet(2);
    if (std::abs(a[0] - b[0]) < 1e-9) continue;
    CHECK(is_incrementally_deployable(network, a, b) == dominates(network, a, b));
  }
}

TEST_CASE("descent direction on a shared-link network") {
  // Two commodities sharing a middle link.
  CongestionNetwork net(
      {AffineLink{0.0, 1.0}, AffineLink{0.1, 2.0}, AffineLink{0.2, 1.5}, AffineLink{0.0, 0.5}},
      {Commodity{1.0, {{0, 1}, {2}}}, Commodity{0.5, {{1, 3}, {2, 3}}}});
  auto game = congestion_game(net);
  REQUIRE(game.has_potential());
  Rng rng(109);
  for (int trial = 0; trial < 100; ++trial) {
    auto x = random_interior_state(game.structure, rng);
    auto c = game(x);
    auto tangent = replicator_vector_field(game, x);
    double slope = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) slope += tangent[k] * c[k];
    if (payoff_spread(game, x) < 1e-9) continue;
    CHECK(slope < 0.0);
    auto next = hedge_step(game, x, 1e-4);
    CHECK(game.potential(next) < game.potential(x));
  }
}

TEST_CASE("routing analysis report") {
  auto report = analyze_parallel_system(paper_system(), 0.5);
  CHECK_THAT(report.wardrop[0], WithinAbs(10.0 / 11.0, 1e-12));
  REQUIRE(report.alpha_bar.has_value());
  CHECK_THAT(*report.alpha_bar, WithinAbs(1.1, 1e-12));
  CHECK_THAT(report.spectral_radius, WithinAbs(6.0 / 11.0, 1e-12));
  CHECK(report.verdict == StabilityVerdict::stable);
  REQUIRE(!report.orbits.empty());

  auto at_bar = analyze_parallel_system(paper_system(), 1.1);
  CHECK_THAT(at_bar.spectral_radius, WithinAbs(0.0, 1e-12));
  CHECK(at_bar.verdict == StabilityVerdict::stable);

  auto tied = analyze_parallel_system(ParallelLinkSystem({0.0, 1.0}, {1.0, 1.0}), 0.5);
  CHECK(tied.verdict == StabilityVerdict::inconclusive);

  auto chaotic = analyze_parallel_system(paper_system(), 5.0);
  bool has_period3 = false;
  for (const auto& orbit : chaotic.orbits) has_period3 |= orbit.period == 3;
  CHECK(has_period3);
  CHECK(chaotic.verdict == StabilityVerdict::unstable);
}

TEST_CASE("chaos scan rows") {
  std::vector<double> alphas{0.1, 5.0};
  std::vector<int> periods{1, 2, 3};
  auto rows = chaos_scan(paper_system(), alphas, periods);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].orbit_counts[0].second == 3);  // fixed points at alpha = 0.1
  CHECK(rows[0].orbit_counts[2].second == 0);
  CHECK(rows[1].orbit_counts[2].second >= 1);  // period-3 orbit at alpha = 5
}
