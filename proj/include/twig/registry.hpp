#pragma once

#include "twig/model.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace twig {

struct ModelInfo {
  std::string name;
  int default_order = 0;
  bool order_adjustable = true;
  std::string description;
};

// Built-in systems, in stable listing order.
std::vector<ModelInfo> list_models();

[[nodiscard]] bool is_registered(const std::string& name);

// Construct a registered system with `order` higher-order nuisance terms
// appended after the normal-form terms (order = -1 selects the model's
// default).  Initial conditions are parameters.  Throws std::invalid_argument
// for unknown names or unsupported orders.
ModelSystem<double> build_model(const std::string& name, int order = -1);

// Custom polynomial-table system from a JSON document:
//   {"name": ..., "state_dim": n, "coordinates": "cartesian"|"polar",
//    "angle_states": [..], "params": [{"name","value","kind","state_index"}],
//    "equations": [[{"coeff": <number|{"param": name}>, "powers": [e1..en],
//                    "param_powers": [q1..qm], "log_of": <state|null>}, ...], ...]}
// "kind" is "rate" or "initial_condition"; "state_index" is required for the
// latter.  Either "coeff": {"param": name} (a single linear coefficient) or an
// explicit "param_powers" vector may scale a term by parameters.
ModelSystem<double> model_from_json(const nlohmann::json& doc);

}  // namespace twig
