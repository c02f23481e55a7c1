#pragma once

#include <algorithm>
#include <climits>
#include <map>
#include <string>
#include <vector>

#include "loom/agent_library.hpp"
#include "loom/chunking.hpp"
#include "loom/config.hpp"
#include "loom/errors.hpp"
#include "loom/time.hpp"
#include "loom/workflow.hpp"

namespace loom {

// Predicted cost of running one config on an uncontended cluster. Busy-only
// accounting: idle power is excluded here and reported by the runtime.
struct ConfigEstimate {
  ConfigPoint config;
  Micros latency_us = 0;
  double gpu_wh = 0.0;
  double cpu_wh = 0.0;
  double total_wh = 0.0;
  double dollars = 0.0;
  int quality = 0;

  double latency_seconds() const { return to_seconds(latency_us); }
};

inline int node_quality(const DagNode& node, const Implementation& impl,
                        int path_count) {
  int q = impl.quality + (path_count - 1);
  if (node.path_quality_ceiling) q = std::min(q, *node.path_quality_ceiling);
  return q;
}

// Latency is the dependency-weighted critical path; node walls come from the
// shared execution plan. Extra execution paths clone a node's work onto
// parallel worker sets: energy and dollars scale with path_count, the wall
// does not.
inline ConfigEstimate estimate(const ConfigPoint& config, const WorkflowDag& dag,
                               const AgentLibrary& library) {
  ConfigEstimate result;
  result.config = config;
  result.quality = INT_MAX;

  std::map<std::string, Micros> wall;
  for (const auto& node : dag.nodes) {
    auto it = config.nodes.find(node.id);
    if (it == config.nodes.end())
      throw InvalidConfigError("config does not cover node '" + node.id + "'");
    const NodeAssignment& assignment = it->second;
    const NodePlan plan = plan_node_execution(node, assignment, library);

    wall[node.id] = plan.wall_us;
    result.gpu_wh += plan.gpu_wh * assignment.path_count;
    result.cpu_wh += plan.cpu_wh * assignment.path_count;
    result.dollars += plan.dollars * assignment.path_count;
    result.quality =
        std::min(result.quality,
                 node_quality(node, *library.implementation(assignment.implementation),
                              assignment.path_count));
  }
  if (dag.nodes.empty()) result.quality = 0;
  result.total_wh = result.gpu_wh + result.cpu_wh;

  std::map<std::string, Micros> finish;
  for (const auto& id : topological_order(dag)) {
    Micros start = 0;
    for (const auto* e : dag.in_edges(id))
      start = std::max(start, finish.at(e->from));
    finish[id] = start + wall.at(id);
    result.latency_us = std::max(result.latency_us, finish[id]);
  }
  return result;
}

namespace detail {

// Criterion values quantize to a nano-unit grid before comparison, so that
// algebraically equal candidates (e.g. the same busy energy summed over a
// different worker count) tie instead of diverging by one ulp.
inline std::int64_t quantize(double value) {
  return static_cast<std::int64_t>(std::llround(value * 1e9));
}

}  // namespace detail

// Strict ordering under an objective hierarchy; ties at criterion k fall to
// k+1 and residual ties break on the lexicographic config identifier.
inline bool objective_less(const ConfigEstimate& a, const ConfigEstimate& b,
                           const ObjectiveHierarchy& objective) {
  for (const Criterion c : objective.criteria) {
    switch (c) {
      case Criterion::min_cost_dollars: {
        const auto qa = detail::quantize(a.dollars), qb = detail::quantize(b.dollars);
        if (qa != qb) return qa < qb;
        break;
      }
      case Criterion::min_energy: {
        const auto qa = detail::quantize(a.gpu_wh), qb = detail::quantize(b.gpu_wh);
        if (qa != qb) return qa < qb;
        break;
      }
      case Criterion::min_latency:
        if (a.latency_us != b.latency_us) return a.latency_us < b.latency_us;
        break;
      case Criterion::max_quality:
        if (a.quality != b.quality) return a.quality > b.quality;
        break;
    }
  }
  return a.config.identifier() < b.config.identifier();
}

inline bool meets_quality_floor(const ConfigEstimate& e,
                                const ObjectiveHierarchy& objective) {
  return !objective.quality_floor || e.quality >= *objective.quality_floor;
}

}  // namespace loom
