#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loom/errors.hpp"

namespace loom {

// One group of identical workers: `workers` parallel allocations of `units`
// resource units each, all drawn from pools of `sku`.
struct Placement {
  std::string sku;
  int units = 1;
  int workers = 1;

  bool operator==(const Placement&) const = default;
};

// Lever assignment for a single DAG node. A node with one placement entry is
// the common homogeneous case; two entries of different hardware classes form
// a hybrid (e.g. GPU plus CPU) worker set for a splittable node.
struct NodeAssignment {
  std::string implementation;
  std::vector<Placement> placements;
  int path_count = 1;

  int fan_out() const {
    int total = 0;
    for (const auto& p : placements) total += p.workers;
    return total;
  }

  bool homogeneous() const { return placements.size() <= 1; }

  bool operator==(const NodeAssignment&) const = default;
};

// Complete assignment of the optimization levers to every DAG node.
struct ConfigPoint {
  std::string label;
  std::map<std::string, NodeAssignment> nodes;  // node id -> assignment

  // Canonical text form; the final tie-break key of the objective hierarchy.
  std::string identifier() const {
    std::ostringstream out;
    for (const auto& [node_id, a] : nodes) {
      out << node_id << "=" << a.implementation << "[";
      for (std::size_t i = 0; i < a.placements.size(); ++i) {
        const auto& p = a.placements[i];
        if (i > 0) out << "+";
        out << p.sku << ":" << p.units << "x" << p.workers;
      }
      out << "]p" << a.path_count << ";";
    }
    return out.str();
  }

  bool operator==(const ConfigPoint&) const = default;
};

inline void to_json(nlohmann::json& j, const Placement& p) {
  j = nlohmann::json{{"sku", p.sku}, {"units", p.units}, {"workers", p.workers}};
}

inline void from_json(const nlohmann::json& j, Placement& p) {
  p.sku = j.at("sku").get<std::string>();
  p.units = j.at("units").get<int>();
  p.workers = j.value("workers", 1);
}

inline void to_json(nlohmann::json& j, const NodeAssignment& a) {
  j = nlohmann::json{{"implementation", a.implementation},
                     {"placements", a.placements},
                     {"path_count", a.path_count}};
}

inline void from_json(const nlohmann::json& j, NodeAssignment& a) {
  a.implementation = j.at("implementation").get<std::string>();
  a.placements = j.at("placements").get<std::vector<Placement>>();
  a.path_count = j.value("path_count", 1);
}

inline void to_json(nlohmann::json& j, const ConfigPoint& c) {
  j = nlohmann::json{{"label", c.label}, {"nodes", c.nodes}};
}

inline void from_json(const nlohmann::json& j, ConfigPoint& c) {
  c.label = j.value("label", "");
  c.nodes = j.at("nodes").get<std::map<std::string, NodeAssignment>>();
}

inline ConfigPoint parse_config_point(const nlohmann::json& j) {
  try {
    ConfigPoint c = j.get<ConfigPoint>();
    for (const auto& [node_id, a] : c.nodes) {
      if (a.implementation.empty())
        throw SchemaError("config node '" + node_id + "': empty implementation");
      if (a.placements.empty())
        throw SchemaError("config node '" + node_id + "': no placements");
      for (const auto& p : a.placements) {
        if (p.units < 1 || p.workers < 1)
          throw SchemaError("config node '" + node_id +
                            "': units and workers must be >= 1");
      }
      if (a.path_count < 1)
        throw SchemaError("config node '" + node_id + "': path_count must be >= 1");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed config point: ") + e.what());
  }
}

}  // namespace loom
