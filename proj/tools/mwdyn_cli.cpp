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

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mwdyn/mwdyn.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMaxIters = 1;
constexpr int kExitSchema = 2;
constexpr int kExitStepRuleFailure = 3;

struct GlobalOptions {
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mwdyn::schema_error("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw mwdyn::schema_error(std::string("invalid JSON: ") + e.what());
  }
}

void write_text(const GlobalOptions& global, const std::string& text) {
  if (global.out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(global.out);
  if (!out) throw mwdyn::schema_error("cannot write '" + global.out + "'");
  out << text;
}

std::string format_state(std::span<const double> values) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) os << ", ";
    os << mwdyn::format17(values[i]);
  }
  os << ']';
  return os.str();
}

mwdyn::CongestionNetwork network_from_document(const nlohmann::json& doc) {
  if (doc.contains("kind")) {
    const auto kind = doc["kind"].get<std::string>();
    if (kind == "parallel_links")
      return mwdyn::to_network(mwdyn::parallel_system_from_json(doc));
    if (kind == "congestion") return mwdyn::congestion_network_from_json(doc);
    throw mwdyn::schema_error("network kind must be parallel_links or congestion");
  }
  if (doc.contains("offsets")) return mwdyn::to_network(mwdyn::parallel_system_from_json(doc));
  return mwdyn::congestion_network_from_json(doc);
}

int run_simulate(const std::string& path, const GlobalOptions& global) {
  auto scenario = mwdyn::scenario_from_json(load_json(path));
  const auto& game = scenario.game;

  std::optional<std::uint64_t> seed = global.seed ? global.seed : scenario.seed;
  std::optional<mwdyn::State> init;
  if (scenario.init) {
    init = mwdyn::State(game.structure, *scenario.init);
  } else {
    if (!seed) throw mwdyn::schema_error("random initial state requires a seed");
    mwdyn::Rng rng(*seed);
    init = mwdyn::random_interior_state(game.structure, rng);
  }
  std::optional<mwdyn::State> target;
  if (scenario.target) target = mwdyn::State(game.structure, *scenario.target);

  const auto trajectory =
      mwdyn::run_trajectory(game, *init, scenario.step_rule, scenario.dynamic,
                            scenario.max_iters, scenario.stop_tol, target);

  std::string out_path = !global.out.empty() ? global.out
                         : scenario.output   ? *scenario.output
                                             : std::string("trajectory.csv");
  std::ofstream out(out_path);
  if (!out) throw mwdyn::schema_error("cannot write '" + out_path + "'");
  mwdyn::write_trajectory_csv(out, trajectory);

  if (!global.quiet) {
    std::cout << "final=" << format_state(trajectory.iterates.back().values())
              << " stop_reason=" << mwdyn::to_string(trajectory.stop_reason)
              << " iterations=" << trajectory.step_sizes.size() << '\n';
    if (!trajectory.message.empty()) std::cout << "detail: " << trajectory.message << '\n';
  }
  switch (trajectory.stop_reason) {
    case mwdyn::StopReason::converged: return kExitOk;
    case mwdyn::StopReason::max_iters: return kExitMaxIters;
    default: return kExitStepRuleFailure;
  }
}

int run_analyze_routing(const std::string& path, double alpha, const GlobalOptions& global) {
  const auto system = mwdyn::parallel_system_from_json(load_json(path));
  const auto report = mwdyn::analyze_parallel_system(system, alpha);
  write_text(global, mwdyn::routing_report_to_json(report));
  return kExitOk;
}

int run_chaos_scan(const std::string& path, std::vector<double> alphas,
                   std::vector<int> periods, int grid, double tol,
                   const GlobalOptions& global) {
  const auto system = mwdyn::parallel_system_from_json(load_json(path));
  if (system.size() != 2)
    throw mwdyn::schema_error("chaos scan needs a two-link system");
  if (alphas.empty()) throw mwdyn::schema_error("no learning rates given");
  const auto rows = mwdyn::chaos_scan(system, alphas, periods, grid, tol);
  std::ostringstream os;
  mwdyn::write_chaos_scan_csv(os, rows);
  write_text(global, os.str());
  return kExitOk;
}

int run_verify(const std::string& path, const std::vector<double>& candidate, double radius,
               std::size_t samples, const GlobalOptions& global) {
  const auto game = mwdyn::game_from_json(load_json(path));
  if (!global.seed) throw mwdyn::schema_error("verify requires --seed");
  mwdyn::State state(game.structure, candidate);
  const auto report = mwdyn::classify_state(game, state, radius, samples, *global.seed);
  write_text(global, mwdyn::report_to_json(report));
  return kExitOk;
}

int run_dominance(const std::string& path, std::vector<double> x_values,
                  std::vector<double> y_values, std::size_t random_n, int grid,
                  const GlobalOptions& global) {
  const auto doc = load_json(path);
  const auto network = network_from_document(doc);

  if (x_values.empty()) {
    // Default incumbent: the Wardrop flow (parallel-link systems only).
    if (!doc.contains("kind") || doc["kind"].get<std::string>() != "parallel_links")
      throw mwdyn::schema_error("--x is required for general congestion networks");
    x_values = mwdyn::wardrop_parallel_affine(mwdyn::parallel_system_from_json(doc)).flows;
  }
  mwdyn::validate_network_flow(network, x_values);

  std::vector<std::vector<double>> mutants;
  if (!y_values.empty()) {
    mutants.push_back(std::move(y_values));
  } else if (random_n > 0) {
    if (!global.seed) throw mwdyn::schema_error("--random requires --seed");
    mwdyn::Rng rng(*global.seed);
    const auto structure = network.structure();
    while (mutants.size() < random_n) {
      auto draw = mwdyn::random_interior_state(structure, rng);
      std::vector<double> y(draw.values().begin(), draw.values().end());
      double gap = 0.0;
      for (std::size_t k = 0; k < y.size(); ++k)
        gap = std::max(gap, std::abs(y[k] - x_values[k]));
      if (gap > 1e-9) mutants.push_back(std::move(y));
    }
  } else {
    throw mwdyn::schema_error("give --y or --random");
  }

  std::ostringstream os;
  os << "{\"x\": " << format_state(x_values) << ", \"pairs\": [";
  std::size_t counterexamples = 0;
  for (std::size_t i = 0; i < mutants.size(); ++i) {
    const auto& y = mutants[i];
    const double delta0 = mwdyn::delta_epsilon(network, x_values, y, 0.0);
    const double barrier = mwdyn::invasion_barrier(network, y, x_values, grid);
    const bool dominant = barrier >= 1.0;
    const bool deployable = mwdyn::is_incrementally_deployable(network, x_values, y, grid);
    if (!dominant) ++counterexamples;
    if (i) os << ", ";
    os << "{\"y\": " << format_state(y) << ", \"delta0\": " << mwdyn::format17(delta0)
       << ", \"barrier\": " << mwdyn::format17(barrier)
       << ", \"dominant\": " << (dominant ? "true" : "false")
       << ", \"deployable\": " << (deployable ? "true" : "false") << "}";
  }
  os << "], \"counterexamples\": " << counterexamples << "}";
  write_text(global, os.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiplicative-weights dynamics on population games"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "random seed");
  app.add_option("--out", global.out, "output file (default: stdout)");
  app.add_flag("--quiet", global.quiet, "suppress summary lines");

  std::string scenario_path;
  auto* simulate = app.add_subcommand("simulate", "run a trajectory from a scenario file");
  simulate->add_option("scenario", scenario_path, "scenario JSON")->required();

  std::string system_path;
  double alpha = 0.5;
  auto* analyze = app.add_subcommand("analyze-routing", "Wardrop + spectral stability report");
  analyze->add_option("system", system_path, "parallel-link JSON")->required();
  analyze->add_option("--alpha", alpha, "learning rate")->required();

  std::string scan_path;
  std::vector<double> scan_alphas;
  std::vector<int> scan_periods{1, 2, 3};
  int scan_grid = 20000;
  double scan_tol = 1e-12;
  auto* scan = app.add_subcommand("chaos-scan", "count periodic orbits across learning rates");
  scan->add_option("system", scan_path, "two-link system JSON")->required();
  scan->add_option("--alphas", scan_alphas, "learning rates")->delimiter(',')->required();
  scan->add_option("--periods", scan_periods, "orbit periods")->delimiter(',');
  scan->add_option("--grid", scan_grid, "scan grid intervals");
  scan->add_option("--tol", scan_tol, "bisection tolerance");

  std::string verify_path;
  std::vector<double> candidate;
  double radius = 0.1;
  std::size_t samples = 1000;
  auto* verify = app.add_subcommand("verify", "fixed-point/Nash/ESS classification");
  verify->add_option("game", verify_path, "game JSON")->required();
  verify->add_option("--candidate", candidate, "candidate state")->delimiter(',')->required();
  verify->add_option("--radius", radius, "sampling ball radius");
  verify->add_option("--samples", samples, "number of samples");

  std::string dominance_path;
  std::vector<double> x_values, y_values;
  std::size_t random_n = 0;
  int grid = 100;
  auto* dominance = app.add_subcommand("dominance", "invasion barriers and deployability");
  dominance->add_option("network", dominance_path, "network JSON")->required();
  dominance->add_option("--x", x_values, "incumbent flow (default: Wardrop)")->delimiter(',');
  dominance->add_option("--y", y_values, "mutant flow")->delimiter(',');
  dominance->add_option("--random", random_n, "number of random mutants");
  dominance->add_option("--grid", grid, "epsilon grid intervals");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitSchema;
  }
  if (!seed_opt->empty()) global.seed = seed_value;

  try {
    if (simulate->parsed()) return run_simulate(scenario_path, global);
    if (analyze->parsed()) return run_analyze_routing(system_path, alpha, global);
    if (scan->parsed())
      return run_chaos_scan(scan_path, scan_alphas, scan_periods, scan_grid, scan_tol, global);
    if (verify->parsed()) return run_verify(verify_path, candidate, radius, samples, global);
    if (dominance->parsed())
      return run_dominance(dominance_path, x_values, y_values, random_n, grid, global);
  } catch (const mwdyn::error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSchema;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSchema;
  }
  return kExitSchema;
}
