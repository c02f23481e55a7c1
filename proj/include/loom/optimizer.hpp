#pragma once

#include <algorithm>
#include <climits>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "loom/agent_library.hpp"
#include "loom/chunking.hpp"
#include "loom/config.hpp"
#include "loom/errors.hpp"
#include "loom/estimator.hpp"
#include "loom/workflow.hpp"

namespace loom {

// Lever-space bounds. The optional capacity caps let the CLI exclude
// assignments that could never fit the target cluster.
struct SearchBounds {
  int max_fanout = 4;
  int max_paths = 2;
  std::map<std::string, int> sku_pool_cap;   // largest single pool per sku
  std::map<std::string, int> sku_total_cap;  // total units per sku
};

namespace detail {

inline bool placement_fits(const SearchBounds& bounds, const std::string& sku,
                           int units, int total_units) {
  if (!bounds.sku_pool_cap.empty()) {
    auto it = bounds.sku_pool_cap.find(sku);
    if (it == bounds.sku_pool_cap.end() || units > it->second) return false;
  }
  if (!bounds.sku_total_cap.empty()) {
    auto it = bounds.sku_total_cap.find(sku);
    if (it == bounds.sku_total_cap.end() || total_units > it->second)
      return false;
  }
  return true;
}

}  // namespace detail

// All valid lever assignments for one node, in deterministic order:
// implementations (best quality first), then profiles, then fan-out, then
// hybrid class pairs, with path counts innermost. Hybrid candidates pair one
// accelerator worker with one host-class worker of the same implementation.
inline std::vector<NodeAssignment> node_options(const DagNode& node,
                                                const AgentLibrary& library,
                                                const SearchBounds& bounds) {
  std::vector<NodeAssignment> options;
  const int max_paths = node.multi_path ? std::max(1, bounds.max_paths) : 1;
  const int fan_cap =
      node.splittable
          ? std::min(bounds.max_fanout, chunk_capacity(node.work_units, node.min_chunk))
          : 1;

  for (const Implementation* impl : library.implementations_for(node.capability)) {
    std::vector<const ExecutionProfile*> profiles;
    for (const ExecutionProfile* p : library.profiles_for(impl->name)) {
      const HardwareSku* sku = library.sku(p->sku);
      if (!impl->supported_classes.count(sku->hardware_class)) continue;
      profiles.push_back(p);
    }

    for (const ExecutionProfile* p : profiles) {
      for (int workers = 1; workers <= std::max(1, fan_cap); ++workers) {
        if (!detail::placement_fits(bounds, p->sku, p->units, p->units * workers))
          continue;
        for (int paths = 1; paths <= max_paths; ++paths) {
          NodeAssignment a;
          a.implementation = impl->name;
          a.placements = {{p->sku, p->units, workers}};
          a.path_count = paths;
          options.push_back(std::move(a));
        }
      }
    }

    if (node.splittable && bounds.max_fanout >= 2) {
      for (const ExecutionProfile* gp : profiles) {
        if (library.sku(gp->sku)->hardware_class != HardwareClass::gpu) continue;
        for (const ExecutionProfile* cp : profiles) {
          if (library.sku(cp->sku)->hardware_class != HardwareClass::cpu) continue;
          if (!detail::placement_fits(bounds, gp->sku, gp->units, gp->units) ||
              !detail::placement_fits(bounds, cp->sku, cp->units, cp->units))
            continue;
          // Skip pairs where one side would receive no work at all.
          const auto split = water_fill_split(node.work_units, node.min_chunk,
                                              {gp->throughput, cp->throughput});
          if (node.work_units > 0 && (split[0] <= 0 || split[1] <= 0)) continue;
          for (int paths = 1; paths <= max_paths; ++paths) {
            NodeAssignment a;
            a.implementation = impl->name;
            a.placements = {{gp->sku, gp->units, 1}, {cp->sku, cp->units, 1}};
            a.path_count = paths;
            options.push_back(std::move(a));
          }
        }
      }
    }
  }
  return options;
}

// Deterministic lazy stream over the cross product of per-node options.
class ConfigEnumerator {
 public:
  ConfigEnumerator(const WorkflowDag& dag, const AgentLibrary& library,
                   const SearchBounds& bounds) {
    for (const auto& node : dag.nodes) {
      node_ids_.push_back(node.id);
      options_.push_back(node_options(node, library, bounds));
      if (options_.back().empty()) exhausted_ = true;
    }
    indices_.assign(options_.size(), 0);
    if (options_.empty()) exhausted_ = true;  // empty dag: no configs
  }

  // Analytic count: the product of per-node option counts.
  std::uint64_t total_count() const {
    if (options_.empty()) return 0;
    std::uint64_t count = 1;
    for (const auto& opts : options_) count *= opts.size();
    return count;
  }

  std::optional<ConfigPoint> next() {
    if (exhausted_) return std::nullopt;
    ConfigPoint config;
    for (std::size_t i = 0; i < node_ids_.size(); ++i)
      config.nodes[node_ids_[i]] = options_[i][indices_[i]];
    // Advance odometer, last node fastest.
    for (std::size_t i = options_.size(); i-- > 0;) {
      if (++indices_[i] < options_[i].size()) break;
      indices_[i] = 0;
      if (i == 0) exhausted_ = true;
    }
    return config;
  }

 private:
  std::vector<std::string> node_ids_;
  std::vector<std::vector<NodeAssignment>> options_;
  std::vector<std::size_t> indices_;
  bool exhausted_ = false;
};

// Non-dominated set under (dollars, energy, latency, -quality), stable order.
inline std::vector<ConfigEstimate> pareto_filter(
    const std::vector<ConfigEstimate>& estimates) {
  auto dominates = [](const ConfigEstimate& a, const ConfigEstimate& b) {
    const bool no_worse = a.dollars <= b.dollars && a.gpu_wh <= b.gpu_wh &&
                          a.latency_us <= b.latency_us && a.quality >= b.quality;
    const bool strictly_better = a.dollars < b.dollars || a.gpu_wh < b.gpu_wh ||
                                 a.latency_us < b.latency_us ||
                                 a.quality > b.quality;
    return no_worse && strictly_better;
  };
  std::vector<ConfigEstimate> kept;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < estimates.size() && !dominated; ++j)
      if (j != i && dominates(estimates[j], estimates[i])) dominated = true;
    if (!dominated) kept.push_back(estimates[i]);
  }
  return kept;
}

inline ConfigEstimate exhaustive_search(const WorkflowDag& dag,
                                        const AgentLibrary& library,
                                        const ObjectiveHierarchy& objective,
                                        const SearchBounds& bounds) {
  ConfigEnumerator stream(dag, library, bounds);
  std::optional<ConfigEstimate> best;
  while (auto config = stream.next()) {
    ConfigEstimate e = estimate(*config, dag, library);
    if (!meets_quality_floor(e, objective)) continue;
    if (!best || objective_less(e, *best, objective)) best = std::move(e);
  }
  if (!best)
    throw NoFeasibleConfigError(
        "no configuration satisfies the quality floor and bounds");
  return *best;
}

namespace detail {

// Node-local ranking key used to seed the greedy sweep: the node's own
// contribution to the hierarchy's criteria.
inline std::vector<double> node_local_key(const DagNode& node,
                                          const NodeAssignment& option,
                                          const AgentLibrary& library,
                                          const ObjectiveHierarchy& objective) {
  const NodePlan plan = plan_node_execution(node, option, library);
  const int quality =
      node_quality(node, *library.implementation(option.implementation),
                   option.path_count);
  std::vector<double> key;
  for (const Criterion c : objective.criteria) {
    switch (c) {
      case Criterion::min_cost_dollars:
        key.push_back(plan.dollars * option.path_count);
        break;
      case Criterion::min_energy:
        key.push_back(plan.gpu_wh * option.path_count);
        break;
      case Criterion::min_latency:
        key.push_back(static_cast<double>(plan.wall_us));
        break;
      case Criterion::max_quality:
        key.push_back(static_cast<double>(-quality));
        break;
    }
  }
  return key;
}

}  // namespace detail

// Coordinate descent over the lever space: seed every node with its cheapest
// option under the primary criterion, then sweep nodes in topological order
// re-optimizing one node at a time until a sweep makes no progress.
inline ConfigEstimate greedy_search(const WorkflowDag& dag,
                                    const AgentLibrary& library,
                                    const ObjectiveHierarchy& objective,
                                    const SearchBounds& bounds,
                                    int max_sweeps = 10) {
  if (dag.nodes.empty())
    throw NoFeasibleConfigError("cannot search an empty dag");

  std::map<std::string, std::vector<NodeAssignment>> options;
  const int floor = objective.quality_floor.value_or(INT_MIN);
  for (const auto& node : dag.nodes) {
    auto all = node_options(node, library, bounds);
    // The config quality is the minimum over nodes, so each node must reach
    // the floor on its own.
    std::vector<NodeAssignment> feasible;
    for (auto& option : all) {
      const int q =
          node_quality(node, *library.implementation(option.implementation),
                       option.path_count);
      if (q >= floor) feasible.push_back(std::move(option));
    }
    if (feasible.empty())
      throw NoFeasibleConfigError("node '" + node.id +
                                  "' has no lever assignment meeting the "
                                  "quality floor");
    options[node.id] = std::move(feasible);
  }

  ConfigPoint current;
  for (const auto& node : dag.nodes) {
    const auto& candidates = options[node.id];
    std::size_t best = 0;
    auto best_key = detail::node_local_key(node, candidates[0], library, objective);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      auto key = detail::node_local_key(node, candidates[i], library, objective);
      if (key < best_key) {
        best = i;
        best_key = std::move(key);
      }
    }
    current.nodes[node.id] = candidates[best];
  }

  ConfigEstimate best_estimate = estimate(current, dag, library);
  const auto order = topological_order(dag);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool improved = false;
    for (const auto& node_id : order) {
      const DagNode* node = dag.find(node_id);
      for (const auto& option : options[node_id]) {
        if (option == best_estimate.config.nodes.at(node_id)) continue;
        ConfigPoint candidate = best_estimate.config;
        candidate.nodes[node_id] = option;
        ConfigEstimate e = estimate(candidate, dag, library);
        if (objective_less(e, best_estimate, objective)) {
          best_estimate = std::move(e);
          improved = true;
        }
      }
      (void)node;
    }
    if (!improved) break;
  }
  return best_estimate;
}

}  // namespace loom
