#pragma once

#include <algorithm>
#include <climits>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loom/agent_library.hpp"
#include "loom/chunking.hpp"
#include "loom/cluster.hpp"
#include "loom/config.hpp"
#include "loom/errors.hpp"
#include "loom/estimator.hpp"
#include "loom/time.hpp"
#include "loom/workflow.hpp"

namespace loom {

// Event kinds in tie-break rank order: simultaneous events process and log in
// (time, kind rank, payload key) order.
enum class EventKind {
  task_ready,
  task_start,
  chunk_complete,
  task_complete,
  alloc,
  release,
  availability,
  rebalance,
  planner_overhead,
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::task_ready: return "task_ready";
    case EventKind::task_start: return "task_start";
    case EventKind::chunk_complete: return "chunk_complete";
    case EventKind::task_complete: return "task_complete";
    case EventKind::alloc: return "alloc";
    case EventKind::release: return "release";
    case EventKind::availability: return "availability";
    case EventKind::rebalance: return "rebalance";
    case EventKind::planner_overhead: return "planner_overhead";
  }
  return "?";
}

struct SimEvent {
  Micros time_us = 0;
  EventKind kind = EventKind::task_ready;
  std::string payload;
};

// One executed span of one chunk on one allocation. The energy invariant is
// energy = units * busy_watts * (end - start) / 3600.
struct TraceEntry {
  std::string node_id;
  int path_index = 0;
  int chunk_index = 0;
  std::string implementation;
  std::string sku;
  int pool_node = 0;
  int units = 0;
  double work_units = 0.0;
  Micros start_us = 0;
  Micros end_us = 0;
  bool completed = true;
  double energy_wh = 0.0;
  double dollars = 0.0;
};

struct CapabilityUsage {
  double busy_seconds = 0.0;
  double energy_wh = 0.0;
  double dollars = 0.0;
};

struct RunMetrics {
  Micros makespan_us = 0;
  double gpu_wh = 0.0;
  double cpu_wh = 0.0;
  double total_wh = 0.0;
  double wall_clock_wh = 0.0;  // busy plus idle draw of powered capacity
  double dollars = 0.0;
  int quality = 0;
  Micros planner_overhead_us = 0;
  std::map<std::string, CapabilityUsage> per_capability;

  double makespan_seconds() const { return to_seconds(makespan_us); }
};

struct ExecutionTrace {
  std::vector<TraceEntry> entries;
  std::vector<SimEvent> events;
};

struct SimOptions {
  std::uint64_t seed = 0;
  Micros planner_overhead_us = 0;
};

struct SimResult {
  ExecutionTrace trace;
  RunMetrics metrics;
  ClusterState cluster;  // final state; everything released on success
};

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline RunMetrics compute_metrics(const ExecutionTrace& trace,
                                  const WorkflowDag& dag,
                                  const ConfigPoint& config,
                                  const AgentLibrary& library,
                                  const ClusterState& cluster,
                                  Micros planner_overhead_us = 0) {
  RunMetrics m;
  m.planner_overhead_us = planner_overhead_us;

  std::map<std::string, std::string> capability_of;
  for (const auto& node : dag.nodes) capability_of[node.id] = node.capability;

  for (const auto& e : trace.entries) {
    m.makespan_us = std::max(m.makespan_us, e.end_us);
    const HardwareSku* sku = library.sku(e.sku);
    if (sku && sku->hardware_class == HardwareClass::gpu) {
      m.gpu_wh += e.energy_wh;
    } else {
      m.cpu_wh += e.energy_wh;
    }
    m.dollars += e.dollars;
    auto& usage = m.per_capability[capability_of.count(e.node_id)
                                       ? capability_of[e.node_id]
                                       : e.node_id];
    usage.busy_seconds += to_seconds(e.end_us - e.start_us);
    usage.energy_wh += e.energy_wh;
    usage.dollars += e.dollars;
  }
  m.total_wh = m.gpu_wh + m.cpu_wh;

  // Wall-clock energy: every powered unit draws idle watts across the run;
  // busy spans add the busy-minus-idle delta.
  double idle_wh = 0.0;
  for (const auto& pool : cluster.pools()) {
    const HardwareSku* sku = library.sku(pool.sku);
    if (!sku) continue;
    double unit_seconds =
        static_cast<double>(pool.initial_capacity) * to_seconds(m.makespan_us);
    for (const auto& entry : cluster.log()) {
      if (entry.pool_key != pool.key() || entry.delta_capacity == 0) continue;
      const Micros remaining = std::max<Micros>(0, m.makespan_us - entry.time_us);
      unit_seconds += entry.delta_capacity * to_seconds(remaining);
    }
    idle_wh += sku->idle_watts_per_unit * unit_seconds / 3600.0;
  }
  double busy_minus_idle_wh = 0.0;
  for (const auto& e : trace.entries) {
    const HardwareSku* sku = library.sku(e.sku);
    if (!sku) continue;
    busy_minus_idle_wh +=
        e.units * (sku->busy_watts_per_unit - sku->idle_watts_per_unit) *
        to_seconds(e.end_us - e.start_us) / 3600.0;
  }
  m.wall_clock_wh = idle_wh + busy_minus_idle_wh;

  int quality = INT_MAX;
  bool any = false;
  for (const auto& node : dag.nodes) {
    auto it = config.nodes.find(node.id);
    if (it == config.nodes.end()) continue;
    const Implementation* impl = library.implementation(it->second.implementation);
    if (!impl) continue;
    quality = std::min(quality, node_quality(node, *impl, it->second.path_count));
    any = true;
  }
  m.quality = any ? quality : 0;
  return m;
}

// ---------------------------------------------------------------------------
// Trace serialization (JSON lines, byte-stable)
// ---------------------------------------------------------------------------

inline std::string trace_entry_line(const TraceEntry& e) {
  std::ostringstream out;
  out << "{\"node\":\"" << e.node_id << "\",\"path\":" << e.path_index
      << ",\"chunk\":" << e.chunk_index << ",\"impl\":\"" << e.implementation
      << "\",\"sku\":\"" << e.sku << "\",\"pool_node\":" << e.pool_node
      << ",\"units\":" << e.units << ",\"work_units\":"
      << format_fixed(e.work_units) << ",\"start_s\":" << format_seconds(e.start_us)
      << ",\"end_s\":" << format_seconds(e.end_us) << ",\"energy_wh\":"
      << format_fixed(e.energy_wh) << ",\"dollars\":" << format_fixed(e.dollars)
      << ",\"completed\":" << (e.completed ? "true" : "false") << "}";
  return out.str();
}

inline std::string metrics_line(const RunMetrics& m, std::uint64_t seed) {
  std::ostringstream out;
  out << "{\"metrics\":{\"makespan_s\":" << format_seconds(m.makespan_us)
      << ",\"gpu_wh\":" << format_fixed(m.gpu_wh) << ",\"cpu_wh\":"
      << format_fixed(m.cpu_wh) << ",\"total_wh\":" << format_fixed(m.total_wh)
      << ",\"wall_clock_wh\":" << format_fixed(m.wall_clock_wh)
      << ",\"dollars\":" << format_fixed(m.dollars) << ",\"quality\":" << m.quality
      << ",\"planner_overhead_s\":" << format_seconds(m.planner_overhead_us)
      << ",\"seed\":" << seed << "}}";
  return out.str();
}

inline std::string serialize_trace(const ExecutionTrace& trace,
                                   const RunMetrics& metrics,
                                   std::uint64_t seed) {
  std::string out;
  for (const auto& e : trace.entries) out += trace_entry_line(e) + "\n";
  out += metrics_line(metrics, seed) + "\n";
  return out;
}

struct ParsedTrace {
  std::vector<TraceEntry> entries;
  nlohmann::json metrics;
};

inline ParsedTrace parse_trace(const std::string& text) {
  ParsedTrace result;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("malformed trace line: ") + e.what());
    }
    if (j.contains("metrics")) {
      result.metrics = j.at("metrics");
      continue;
    }
    TraceEntry e;
    e.node_id = j.at("node").get<std::string>();
    e.path_index = j.at("path").get<int>();
    e.chunk_index = j.at("chunk").get<int>();
    e.implementation = j.at("impl").get<std::string>();
    e.sku = j.at("sku").get<std::string>();
    e.pool_node = j.at("pool_node").get<int>();
    e.units = j.at("units").get<int>();
    e.work_units = j.at("work_units").get<double>();
    e.start_us = to_micros(j.at("start_s").get<double>());
    e.end_us = to_micros(j.at("end_s").get<double>());
    e.energy_wh = j.at("energy_wh").get<double>();
    e.dollars = j.at("dollars").get<double>();
    e.completed = j.at("completed").get<bool>();
    result.entries.push_back(std::move(e));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Simulator
// ---------------------------------------------------------------------------

namespace detail {

inline std::string task_key(const std::string& node_id, int path) {
  return node_id + "#p" + std::to_string(path);
}

struct HeapEvent {
  Micros time_us = 0;
  int rank = 0;
  std::string key;
  EventKind kind = EventKind::task_ready;
  std::string node_id;
  int path = 0;
  int chunk = -1;

  bool operator>(const HeapEvent& other) const {
    if (time_us != other.time_us) return time_us > other.time_us;
    if (rank != other.rank) return rank > other.rank;
    return key > other.key;
  }
};

struct ChunkRuntime {
  std::string sku;
  int units = 0;
  Micros setup_us = 0;  // cold-start setup from the profile
  Micros run_us = 0;
  double work = 0.0;
  bool done = false;
  bool running = false;
  std::int64_t allocation_id = -1;
  Micros started_at = 0;
  Micros setup_applied_us = 0;
};

struct TaskRuntime {
  const DagNode* node = nullptr;
  int path = 0;
  std::vector<ChunkRuntime> chunks;
  int chunks_remaining = 0;
  int pending_preds = 0;
  bool started = false;
  bool complete = false;

  std::string key() const { return task_key(node->id, path); }
};

struct QueueItem {
  std::string node_id;
  int path = 0;
  int chunk = -1;  // -1: whole-task gang, otherwise one re-queued chunk
  Micros since_us = 0;
};

}  // namespace detail

// Deterministic discrete-event executor. Single-threaded: the event loop owns
// all mutable state; identical inputs produce a byte-identical trace.
class Simulator {
 public:
  SimResult execute(const WorkflowDag& dag, const ConfigPoint& config,
                    ClusterState cluster, const AgentLibrary& library,
                    const SimOptions& options = {}) {
    using detail::ChunkRuntime;
    using detail::HeapEvent;
    using detail::QueueItem;
    using detail::TaskRuntime;

    SimResult result;
    ExecutionTrace& trace = result.trace;

    // Lay out every (node, path) instance up front from the shared plan, so
    // the runtime executes exactly what the estimator predicted.
    std::map<std::string, TaskRuntime> tasks;
    std::map<std::string, int> paths_remaining;
    std::map<std::string, std::set<std::string>> successors;
    for (const auto& node : dag.nodes) {
      auto it = config.nodes.find(node.id);
      if (it == config.nodes.end())
        throw InvalidConfigError("config does not cover node '" + node.id + "'");
      const NodeAssignment& assignment = it->second;
      const NodePlan plan = plan_node_execution(node, assignment, library);
      paths_remaining[node.id] = assignment.path_count;

      std::set<std::string> preds;
      for (const auto* e : dag.in_edges(node.id)) preds.insert(e->from);

      for (int path = 0; path < assignment.path_count; ++path) {
        TaskRuntime task;
        task.node = &node;
        task.path = path;
        task.pending_preds = static_cast<int>(preds.size());
        for (const auto& w : plan.workers) {
          ChunkRuntime chunk;
          chunk.sku = w.sku;
          chunk.units = w.units;
          chunk.setup_us = w.setup_us;
          chunk.run_us = w.run_us;
          chunk.work = w.chunk_work;
          task.chunks.push_back(chunk);
        }
        task.chunks_remaining = static_cast<int>(task.chunks.size());
        tasks.emplace(task.key(), std::move(task));
      }
    }
    for (const auto& e : dag.edges) successors[e.from].insert(e.to);

    auto implementation_of = [&](const std::string& node_id) -> const std::string& {
      return config.nodes.at(node_id).implementation;
    };

    std::priority_queue<HeapEvent, std::vector<HeapEvent>, std::greater<>> heap;
    std::vector<QueueItem> queue;
    std::vector<SimEvent> batch_events;
    Micros makespan = 0;
    int tasks_left = static_cast<int>(tasks.size());

    auto log_event = [&](Micros t, EventKind kind, std::string payload) {
      batch_events.push_back({t, kind, std::move(payload)});
    };

    auto push = [&](Micros t, EventKind kind, const std::string& node_id,
                    int path, int chunk) {
      HeapEvent e;
      e.time_us = t;
      e.rank = static_cast<int>(kind);
      e.kind = kind;
      e.node_id = node_id;
      e.path = path;
      e.chunk = chunk;
      char suffix[32];
      std::snprintf(suffix, sizeof(suffix), "#%04d#%06d", path,
                    chunk < 0 ? 0 : chunk + 1);
      e.key = node_id + suffix;
      heap.push(std::move(e));
    };

    push(0, EventKind::planner_overhead, "planner", 0, -1);
    const auto& availability = cluster.availability_events();
    for (std::size_t i = 0; i < availability.size(); ++i)
      push(availability[i].time_us, EventKind::availability, "availability", 0,
           static_cast<int>(i));

    for (const auto& [key, task] : tasks)
      if (task.pending_preds == 0)
        push(0, EventKind::task_ready, task.node->id, task.path, -1);

    auto write_entry = [&](const TaskRuntime& task, const ChunkRuntime& chunk,
                           int chunk_index, Micros end_us, bool completed) {
      const Allocation& alloc = cluster.allocation({chunk.allocation_id});
      const HardwareSku* sku = library.sku(chunk.sku);
      TraceEntry entry;
      entry.node_id = task.node->id;
      entry.path_index = task.path;
      entry.chunk_index = chunk_index;
      entry.implementation = implementation_of(task.node->id);
      entry.sku = chunk.sku;
      entry.pool_node = alloc.node_index;
      entry.units = chunk.units;
      entry.work_units = chunk.work;
      entry.start_us = chunk.started_at;
      entry.end_us = end_us;
      entry.completed = completed;
      const double hours = to_seconds(end_us - chunk.started_at) / 3600.0;
      entry.energy_wh = chunk.units * sku->busy_watts_per_unit * hours;
      entry.dollars = chunk.units * sku->dollars_per_unit_hour * hours;
      trace.entries.push_back(std::move(entry));
    };

    // Gang placement on a scratch copy of the pool state; commits only when
    // every worker fits. Placement preference: warm pool first, then the pool
    // left with the largest free block, then pool order.
    struct ScratchPool {
      int free_units = 0;
      std::map<std::string, int> warm_free;
    };
    auto try_place = [&](TaskRuntime& task, const std::vector<int>& chunk_indices,
                         Micros now) -> bool {
      std::vector<ScratchPool> scratch;
      scratch.reserve(cluster.pools().size());
      for (const auto& p : cluster.pools())
        scratch.push_back({p.free_units(), p.warm_free});
      const std::string& impl = implementation_of(task.node->id);

      std::vector<int> choices;
      for (int ci : chunk_indices) {
        const ChunkRuntime& chunk = task.chunks[static_cast<std::size_t>(ci)];
        int best = -1;
        bool best_warm = false;
        int best_after = -1;
        for (std::size_t i = 0; i < cluster.pools().size(); ++i) {
          const auto& pool = cluster.pools()[i];
          if (pool.sku != chunk.sku) continue;
          if (scratch[i].free_units < chunk.units) continue;
          auto warm_it = scratch[i].warm_free.find(impl);
          const bool warm = warm_it != scratch[i].warm_free.end() &&
                            warm_it->second >= chunk.units;
          const int after = scratch[i].free_units - chunk.units;
          if (best < 0 || (warm && !best_warm) ||
              (warm == best_warm && after > best_after)) {
            best = static_cast<int>(i);
            best_warm = warm;
            best_after = after;
          }
        }
        if (best < 0) return false;
        // Mirror the allocator's warm accounting on the scratch state.
        auto& s = scratch[static_cast<std::size_t>(best)];
        int warm_taken = 0;
        if (auto it = s.warm_free.find(impl); it != s.warm_free.end()) {
          warm_taken = std::min(it->second, chunk.units);
          it->second -= warm_taken;
          if (it->second == 0) s.warm_free.erase(it);
        }
        int warm_total = 0;
        for (const auto& [name, units] : s.warm_free) warm_total += units;
        int cold = chunk.units - warm_taken;
        const int unwarmed = std::max(0, s.free_units - warm_total - warm_taken);
        cold -= std::min(cold, unwarmed);
        for (auto it = s.warm_free.begin(); it != s.warm_free.end() && cold > 0;) {
          const int evicted = std::min(it->second, cold);
          it->second -= evicted;
          cold -= evicted;
          it = it->second == 0 ? s.warm_free.erase(it) : std::next(it);
        }
        s.free_units -= chunk.units;
        choices.push_back(best);
      }

      for (std::size_t k = 0; k < chunk_indices.size(); ++k) {
        const int ci = chunk_indices[k];
        ChunkRuntime& chunk = task.chunks[static_cast<std::size_t>(ci)];
        const std::string pool_key =
            cluster.pools()[static_cast<std::size_t>(choices[k])].key();
        const AllocationHandle handle =
            cluster.allocate_in(pool_key, chunk.units, impl, now);
        const Allocation& alloc = cluster.allocation(handle);
        chunk.allocation_id = handle.id;
        chunk.running = true;
        chunk.started_at = now;
        chunk.setup_applied_us = alloc.warm ? 0 : chunk.setup_us;
        log_event(now, EventKind::alloc,
                  task.key() + "#c" + std::to_string(ci) + "@" + pool_key);
        push(now + chunk.setup_applied_us + chunk.run_us,
             EventKind::chunk_complete, task.node->id, task.path, ci);
      }
      if (!task.started) {
        task.started = true;
        log_event(now, EventKind::task_start, task.key());
      }
      return true;
    };

    auto grant_pending = [&](const std::string& sku, std::size_t from) {
      for (std::size_t i = from; i < availability.size(); ++i) {
        if (availability[i].sku == sku &&
            availability[i].kind == AvailabilityEvent::Kind::spot_grant)
          return true;
      }
      return false;
    };

    std::size_t availability_cursor = 0;
    auto check_deadlock = [&](const TaskRuntime& task,
                              const std::vector<int>& chunk_indices) {
      for (int ci : chunk_indices) {
        const ChunkRuntime& chunk = task.chunks[static_cast<std::size_t>(ci)];
        if (chunk.units > cluster.max_pool_capacity(chunk.sku) &&
            !grant_pending(chunk.sku, availability_cursor))
          throw DeadlockError("node '" + task.node->id + "' needs " +
                              std::to_string(chunk.units) + " units of '" +
                              chunk.sku + "' but no pool is that large");
      }
    };

    auto run_scheduler = [&](Micros now) {
      std::set<std::string> blocked_capabilities;
      for (auto it = queue.begin(); it != queue.end();) {
        TaskRuntime& task = tasks.at(detail::task_key(it->node_id, it->path));
        const std::string& capability = task.node->capability;
        if (blocked_capabilities.count(capability)) {
          ++it;
          continue;
        }
        std::vector<int> chunk_indices;
        if (it->chunk < 0) {
          for (int ci = 0; ci < static_cast<int>(task.chunks.size()); ++ci)
            chunk_indices.push_back(ci);
        } else {
          chunk_indices.push_back(it->chunk);
        }
        check_deadlock(task, chunk_indices);
        if (try_place(task, chunk_indices, now)) {
          it = queue.erase(it);
        } else {
          blocked_capabilities.insert(capability);
          ++it;
        }
      }
    };

    auto flush_batch = [&]() {
      std::stable_sort(batch_events.begin(), batch_events.end(),
                       [](const SimEvent& a, const SimEvent& b) {
                         if (a.time_us != b.time_us) return a.time_us < b.time_us;
                         if (a.kind != b.kind) return a.kind < b.kind;
                         return a.payload < b.payload;
                       });
      for (auto& e : batch_events) trace.events.push_back(std::move(e));
      batch_events.clear();
    };

    while (!heap.empty()) {
      const Micros now = heap.top().time_us;
      bool state_changed = false;
      while (!heap.empty() && heap.top().time_us == now) {
        const HeapEvent event = heap.top();
        heap.pop();
        switch (event.kind) {
          case EventKind::planner_overhead:
            log_event(now, EventKind::planner_overhead,
                      format_seconds(options.planner_overhead_us));
            break;
          case EventKind::availability: {
            const auto& a = availability[static_cast<std::size_t>(event.chunk)];
            availability_cursor = static_cast<std::size_t>(event.chunk) + 1;
            log_event(now, EventKind::availability,
                      a.sku +
                          (a.kind == AvailabilityEvent::Kind::spot_grant ? "+"
                                                                         : "-") +
                          std::to_string(std::abs(a.delta_units)));
            const auto preempted = cluster.apply_availability(a);
            for (const auto& alloc : preempted) {
              // Abort the running chunk on this allocation and re-queue it;
              // progress since the chunk boundary is lost.
              for (auto& [key, task] : tasks) {
                for (int ci = 0; ci < static_cast<int>(task.chunks.size()); ++ci) {
                  ChunkRuntime& chunk = task.chunks[static_cast<std::size_t>(ci)];
                  if (!chunk.running || chunk.allocation_id != alloc.id) continue;
                  write_entry(task, chunk, ci, now, false);
                  chunk.running = false;
                  chunk.allocation_id = -1;
                  queue.push_back({task.node->id, task.path, ci, now});
                  log_event(now, EventKind::task_ready,
                            key + "#c" + std::to_string(ci) + " requeued");
                }
              }
            }
            state_changed = true;
            break;
          }
          case EventKind::chunk_complete: {
            TaskRuntime& task =
                tasks.at(detail::task_key(event.node_id, event.path));
            ChunkRuntime& chunk = task.chunks[static_cast<std::size_t>(event.chunk)];
            if (!chunk.running || chunk.done) break;  // preempted: stale event
            if (chunk.started_at + chunk.setup_applied_us + chunk.run_us != now)
              break;  // superseded by a re-run
            chunk.done = true;
            chunk.running = false;
            write_entry(task, chunk, event.chunk, now, true);
            cluster.release({chunk.allocation_id}, now);
            log_event(now, EventKind::chunk_complete, event.key);
            log_event(now, EventKind::release, event.key);
            if (--task.chunks_remaining == 0)
              push(now, EventKind::task_complete, task.node->id, task.path, -1);
            state_changed = true;
            break;
          }
          case EventKind::task_complete: {
            TaskRuntime& task =
                tasks.at(detail::task_key(event.node_id, event.path));
            if (task.complete) break;
            task.complete = true;
            --tasks_left;
            makespan = std::max(makespan, now);
            log_event(now, EventKind::task_complete, task.key());
            if (--paths_remaining[task.node->id] == 0) {
              for (const auto& succ : successors[task.node->id]) {
                for (auto& [key, other] : tasks) {
                  if (other.node->id != succ) continue;
                  if (--other.pending_preds == 0)
                    push(now, EventKind::task_ready, other.node->id, other.path,
                         -1);
                }
              }
            }
            break;
          }
          case EventKind::task_ready: {
            TaskRuntime& task =
                tasks.at(detail::task_key(event.node_id, event.path));
            queue.push_back({task.node->id, task.path, -1, now});
            log_event(now, EventKind::task_ready, task.key());
            state_changed = true;
            break;
          }
          default:
            break;
        }
      }
      if (state_changed) run_scheduler(now);
      flush_batch();
      if (heap.empty() && !queue.empty())
        throw DeadlockError("node '" + queue.front().node_id +
                            "' is queued but no release or grant can ever free "
                            "enough units");
    }

    if (tasks_left != 0)
      throw DeadlockError("simulation drained with incomplete tasks");

    result.metrics = compute_metrics(trace, dag, config, library, cluster,
                                     options.planner_overhead_us);
    result.metrics.makespan_us = makespan;
    result.cluster = std::move(cluster);
    return result;
  }
};

}  // namespace loom
