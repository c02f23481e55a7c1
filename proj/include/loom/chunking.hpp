#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "loom/agent_library.hpp"
#include "loom/config.hpp"
#include "loom/errors.hpp"
#include "loom/time.hpp"
#include "loom/workflow.hpp"

namespace loom {

// Equal split of a splittable task's work. Chunk count is
// min(fan_out, floor(work / min_chunk)), clamped to at least one chunk.
inline std::vector<double> split_task(double work, int fan_out, double min_chunk) {
  int count = 1;
  if (fan_out > 1 && min_chunk > 0) {
    const int capacity = static_cast<int>(std::floor(work / min_chunk));
    count = std::max(1, std::min(fan_out, capacity));
  }
  return std::vector<double>(static_cast<std::size_t>(count), work / count);
}

inline int chunk_capacity(double work, double min_chunk) {
  if (min_chunk <= 0) return 1;
  return std::max(1, static_cast<int>(std::floor(work / min_chunk)));
}

// Splits work across workers of unequal speed: the work is cut into
// min-chunk-sized quanta and each quantum goes to the worker that would finish
// it first (ties to the lower worker index). Returns per-worker work; a worker
// may receive zero.
inline std::vector<double> water_fill_split(double work, double min_chunk,
                                            const std::vector<double>& speeds) {
  const int quanta = chunk_capacity(work, min_chunk);
  const double quantum = work / quanta;
  std::vector<double> completion(speeds.size(), 0.0);
  std::vector<int> counts(speeds.size(), 0);
  for (int q = 0; q < quanta; ++q) {
    std::size_t best = 0;
    double best_time = completion[0] + quantum / speeds[0];
    for (std::size_t w = 1; w < speeds.size(); ++w) {
      const double t = completion[w] + quantum / speeds[w];
      if (t < best_time) {
        best = w;
        best_time = t;
      }
    }
    completion[best] = best_time;
    counts[best]++;
  }
  std::vector<double> assigned(speeds.size(), 0.0);
  for (std::size_t w = 0; w < speeds.size(); ++w)
    assigned[w] = counts[w] * quantum;
  return assigned;
}

// One worker of a node execution: a single allocation running one chunk.
struct PlannedWorker {
  std::string sku;
  HardwareClass hardware_class = HardwareClass::cpu;
  int units = 0;
  double chunk_work = 0.0;
  Micros setup_us = 0;  // cold-start value; the runtime waives it on warm units
  Micros run_us = 0;

  Micros duration_us() const { return setup_us + run_us; }
};

// Per-path execution plan of one node under one assignment.
struct NodePlan {
  std::vector<PlannedWorker> workers;
  Micros wall_us = 0;
  double gpu_wh = 0.0;
  double cpu_wh = 0.0;
  double dollars = 0.0;
};

// Resolves an assignment against the profile catalog and lays out the chunk
// work per worker. The estimator consumes the plan analytically; the runtime
// schedules exactly the same workers through the event loop, so the two agree
// wherever the cluster is uncontended.
inline NodePlan plan_node_execution(const DagNode& node,
                                    const NodeAssignment& assignment,
                                    const AgentLibrary& library) {
  const Implementation* impl = library.implementation(assignment.implementation);
  if (!impl)
    throw InvalidConfigError("node '" + node.id + "': unknown implementation '" +
                             assignment.implementation + "'");
  if (impl->capability != node.capability)
    throw InvalidConfigError("node '" + node.id + "': implementation '" +
                             impl->name + "' realizes '" + impl->capability +
                             "', not '" + node.capability + "'");
  if (assignment.placements.empty())
    throw InvalidConfigError("node '" + node.id + "': no placements");
  if (assignment.path_count < 1)
    throw InvalidConfigError("node '" + node.id + "': path_count must be >= 1");
  if (assignment.path_count > 1 && !node.multi_path)
    throw InvalidConfigError("node '" + node.id +
                             "' is not flagged multi-path in the lexicon");

  const int total_workers = assignment.fan_out();
  if (total_workers > 1 && !node.splittable)
    throw InvalidConfigError("node '" + node.id +
                             "' is not splittable; fan-out must be 1");

  struct ResolvedWorker {
    const ExecutionProfile* profile;
    const HardwareSku* sku;
  };
  std::vector<ResolvedWorker> resolved;
  for (const auto& placement : assignment.placements) {
    const HardwareSku* sku = library.sku(placement.sku);
    if (!sku)
      throw InvalidConfigError("node '" + node.id + "': unknown sku '" +
                               placement.sku + "'");
    if (!impl->supported_classes.count(sku->hardware_class))
      throw InvalidConfigError("node '" + node.id + "': implementation '" +
                               impl->name + "' does not support " +
                               to_string(sku->hardware_class) + " sku '" +
                               sku->id + "'");
    const ExecutionProfile* profile =
        library.profile(impl->name, sku->id, placement.units);
    if (!profile)
      throw InvalidConfigError("node '" + node.id + "': no profile for (" +
                               impl->name + ", " + sku->id + ", " +
                               std::to_string(placement.units) + ")");
    if (placement.workers < 1)
      throw InvalidConfigError("node '" + node.id + "': workers must be >= 1");
    for (int w = 0; w < placement.workers; ++w)
      resolved.push_back({profile, sku});
  }

  // Work division: equal chunks for homogeneous worker sets, speed-weighted
  // water fill when worker speeds differ.
  std::vector<double> chunk_work;
  if (resolved.size() == 1) {
    chunk_work = {node.work_units};
  } else if (assignment.homogeneous()) {
    chunk_work = split_task(node.work_units, total_workers, node.min_chunk);
    if (static_cast<int>(chunk_work.size()) != total_workers)
      throw InvalidConfigError(
          "node '" + node.id + "': fan-out " + std::to_string(total_workers) +
          " exceeds the chunk capacity of " +
          std::to_string(chunk_capacity(node.work_units, node.min_chunk)));
  } else {
    std::vector<double> speeds;
    speeds.reserve(resolved.size());
    for (const auto& r : resolved) speeds.push_back(r.profile->throughput);
    chunk_work = water_fill_split(node.work_units, node.min_chunk, speeds);
    for (double w : chunk_work) {
      if (w <= 0.0 && node.work_units > 0.0)
        throw InvalidConfigError("node '" + node.id +
                                 "': degenerate hybrid placement; a worker "
                                 "receives no work");
    }
  }

  NodePlan plan;
  for (std::size_t w = 0; w < resolved.size(); ++w) {
    const auto& r = resolved[w];
    PlannedWorker worker;
    worker.sku = r.sku->id;
    worker.hardware_class = r.sku->hardware_class;
    worker.units = r.profile->units;
    worker.chunk_work = chunk_work[w];
    worker.setup_us = to_micros(r.profile->setup_seconds);
    worker.run_us = to_micros(worker.chunk_work / r.profile->throughput);
    plan.wall_us = std::max(plan.wall_us, worker.duration_us());

    const double hours = to_seconds(worker.duration_us()) / 3600.0;
    const double wh = worker.units * r.sku->busy_watts_per_unit * hours;
    if (r.sku->hardware_class == HardwareClass::gpu) {
      plan.gpu_wh += wh;
    } else {
      plan.cpu_wh += wh;
    }
    plan.dollars += worker.units * r.sku->dollars_per_unit_hour * hours;
    plan.workers.push_back(std::move(worker));
  }
  return plan;
}

}  // namespace loom
