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

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "mwdyn/dynamics.hpp"
#include "mwdyn/errors.hpp"
#include "mwdyn/game.hpp"
#include "mwdyn/routing.hpp"

namespace mwdyn {

/// Schema problems in configuration documents.
struct schema_error : error {
  using error::error;
};

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw schema_error(std::string("missing field '") + name + "'");
  return *it;
}

inline std::vector<double> number_list(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw schema_error(std::string(what) + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw schema_error(std::string(what) + " must contain only numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

inline Eigen::MatrixXd matrix(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw schema_error("matrix must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto first = number_list(j.front(), "matrix row");
  Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(first.size()));
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto row = number_list(j[static_cast<std::size_t>(r)], "matrix row");
    if (row.size() != first.size()) throw schema_error("matrix rows differ in length");
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

}  // namespace detail

inline ParallelLinkSystem parallel_system_from_json(const nlohmann::json& j) {
  auto offsets = detail::number_list(detail::field(j, "offsets"), "offsets");
  auto slopes = detail::number_list(detail::field(j, "slopes"), "slopes");
  double demand = 1.0;
  if (j.contains("demand")) {
    if (!j["demand"].is_number()) throw schema_error("demand must be a number");
    demand = j["demand"].get<double>();
  }
  try {
    return ParallelLinkSystem(std::move(offsets), std::move(slopes), demand);
  } catch (const error& e) {
    throw schema_error(e.what());
  }
}

inline CongestionNetwork congestion_network_from_json(const nlohmann::json& j) {
  std::vector<AffineLink> links;
  for (const auto& lj : detail::field(j, "links")) {
    AffineLink link;
    link.offset = detail::field(lj, "offset").get<double>();
    link.slope = detail::field(lj, "slope").get<double>();
    links.push_back(link);
  }
  std::vector<Commodity> commodities;
  for (const auto& cj : detail::field(j, "commodities")) {
    Commodity c;
    c.demand = detail::field(cj, "demand").get<double>();
    for (const auto& pj : detail::field(cj, "paths")) {
      std::vector<std::size_t> path;
      for (const auto& e : pj) path.push_back(e.get<std::size_t>());
      c.paths.push_back(std::move(path));
    }
    commodities.push_back(std::move(c));
  }
  try {
    return CongestionNetwork(std::move(links), std::move(commodities));
  } catch (const error& e) {
    throw schema_error(e.what());
  }
}

/// Game document: {"kind": "bimatrix"|"qp"|"parallel_links"|"congestion",
/// family fields, "normalize": bool?}.
inline GameField game_from_json(const nlohmann::json& j) {
  const auto& kind_field = detail::field(j, "kind");
  if (!kind_field.is_string()) throw schema_error("kind must be a string");
  const std::string kind = kind_field.get<std::string>();
  GameField game = [&] {
    try {
      if (kind == "bimatrix")
        return linear_symmetric_game(detail::matrix(detail::field(j, "matrix")));
      if (kind == "qp") return standard_qp_game(detail::matrix(detail::field(j, "matrix")));
      if (kind == "parallel_links")
        return congestion_game(to_network(parallel_system_from_json(j)));
      if (kind == "congestion") return congestion_game(congestion_network_from_json(j));
      throw schema_error("unknown game kind '" + kind + "'");
    } catch (const schema_error&) {
      throw;
    } catch (const error& e) {
      throw schema_error(e.what());
    }
  }();
  if (j.contains("normalize") && j["normalize"].get<bool>()) game = normalize_game(game);
  return game;
}

struct Scenario {
  GameField game;
  Dynamic dynamic = Dynamic::replicator;
  StepRule step_rule = ConstantRate{};
  std::optional<std::vector<double>> init;  // absent: seeded random interior
  std::optional<std::uint64_t> seed;
  std::size_t max_iters = 1000;
  double stop_tol = 1e-9;
  std::optional<std::vector<double>> target;
  std::optional<std::string> output;
};

inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s{
      .game = game_from_json(detail::field(j, "game")),
      .dynamic = Dynamic::replicator,
      .step_rule = ConstantRate{},
      .init = {},
      .seed = {},
      .max_iters = 1000,
      .stop_tol = 1e-9,
      .target = {},
      .output = {},
  };

  const std::string dynamic = detail::field(j, "dynamic").get<std::string>();
  if (dynamic == "replicator")
    s.dynamic = Dynamic::replicator;
  else if (dynamic == "hedge")
    s.dynamic = Dynamic::hedge;
  else
    throw schema_error("dynamic must be 'replicator' or 'hedge'");

  const auto& rj = detail::field(j, "step_rule");
  const std::string kind = detail::field(rj, "kind").get<std::string>();
  if (kind == "constant")
    s.step_rule = ConstantRate{detail::field(rj, "alpha").get<double>()};
  else if (kind == "per_population")
    s.step_rule = PerPopulationRate{detail::field(rj, "kappa").get<double>()};
  else if (kind == "line_search") {
    LineSearchRule rule;
    if (rj.contains("alpha0")) rule.alpha0 = rj["alpha0"].get<double>();
    if (rj.contains("max_halvings")) rule.max_halvings = rj["max_halvings"].get<int>();
    s.step_rule = rule;
  } else if (kind == "ess_oracle") {
    EssOracleRule rule;
    rule.target = detail::number_list(detail::field(rj, "target"), "target");
    if (rj.contains("safety")) rule.safety = rj["safety"].get<double>();
    s.step_rule = rule;
  } else {
    throw schema_error("unknown step rule '" + kind + "'");
  }
  try {
    validate_rule(s.step_rule);
  } catch (const error& e) {
    throw schema_error(e.what());
  }

  const auto& init = detail::field(j, "init");
  if (init.is_string()) {
    if (init.get<std::string>() != "random_interior")
      throw schema_error("init must be an array or \"random_interior\"");
  } else {
    s.init = detail::number_list(init, "init");
  }
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  s.max_iters = detail::field(j, "max_iters").get<std::size_t>();
  s.stop_tol = detail::field(j, "stop_tol").get<double>();
  if (!(s.stop_tol > 0.0)) throw schema_error("stop_tol must be positive");
  if (j.contains("target")) s.target = detail::number_list(j["target"], "target");
  if (j.contains("output")) s.output = j["output"].get<std::string>();
  return s;
}

}  // namespace mwdyn
