#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loom/agent_library.hpp"
#include "loom/errors.hpp"
#include "loom/time.hpp"
#include "loom/workflow.hpp"

namespace loom {

// A capacity pool: the units of one SKU on one physical node. Allocations
// never span pools.
struct HardwarePool {
  std::string sku;
  int node_index = 0;
  int capacity = 0;
  int initial_capacity = 0;
  int allocated = 0;
  int reserved = 0;
  // Units that are free but still hold an implementation loaded.
  std::map<std::string, int> warm_free;

  std::string key() const { return sku + "@n" + std::to_string(node_index); }
  int free_units() const { return capacity - allocated - reserved; }

  int warm_free_total() const {
    int total = 0;
    for (const auto& [impl, units] : warm_free) total += units;
    return total;
  }
};

struct AvailabilityEvent {
  enum class Kind { spot_grant, spot_revoke };

  Micros time_us = 0;
  std::string sku;
  int delta_units = 0;
  Kind kind = Kind::spot_grant;
};

inline void from_json(const nlohmann::json& j, AvailabilityEvent& e) {
  e.time_us = to_micros(j.at("time").get<double>());
  e.sku = j.at("sku").get<std::string>();
  e.delta_units = j.at("delta_units").get<int>();
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "spot_grant") {
    e.kind = AvailabilityEvent::Kind::spot_grant;
  } else if (kind == "spot_revoke") {
    e.kind = AvailabilityEvent::Kind::spot_revoke;
  } else {
    throw SchemaError("unknown availability event kind '" + kind + "'");
  }
}

struct AllocationHandle {
  std::int64_t id = -1;
};

struct Allocation {
  std::int64_t id = -1;
  std::string pool_key;
  std::string sku;
  int node_index = 0;
  int units = 0;
  std::string implementation;
  Micros since_us = 0;
  bool warm = false;  // setup waived on allocation
  bool active = false;
};

// Timestamped accounting log; replayable for capacity-conservation checks.
struct ClusterLogEntry {
  Micros time_us = 0;
  std::string action;  // "alloc" | "release" | "grant" | "revoke" | "preempt"
  std::string pool_key;
  int delta_allocated = 0;
  int delta_capacity = 0;
  std::int64_t allocation_id = -1;
};

struct PoolStats {
  std::string sku;
  int node_index = 0;
  int capacity = 0;
  int allocated = 0;
  int free_units = 0;
  std::map<std::string, int> warm_by_implementation;
};

struct UtilizationReport {
  Micros time_us = 0;
  std::vector<PoolStats> pools;

  int total_allocated(const std::string& sku) const {
    int total = 0;
    for (const auto& p : pools)
      if (p.sku == sku) total += p.allocated;
    return total;
  }

  int total_free(const std::string& sku) const {
    int total = 0;
    for (const auto& p : pools)
      if (p.sku == sku) total += p.free_units;
    return total;
  }
};

struct WarmSetChange {
  std::string pool_key;
  std::string from_implementation;
  std::string to_implementation;
  int units = 0;
};

// Simulated heterogeneous resource pools with allocation, availability churn
// and warm-set accounting. Owned exclusively by the simulation event loop;
// readers get value snapshots.
class ClusterState {
 public:
  ClusterState() = default;

  void add_pool(std::string sku, int node_index, int units) {
    HardwarePool pool;
    pool.sku = std::move(sku);
    pool.node_index = node_index;
    pool.capacity = units;
    pool.initial_capacity = units;
    pools_.push_back(std::move(pool));
    sort_pools();
  }

  // Cluster config file: {"nodes": [{"skus": [{"sku_id":..., "units":...}]}],
  //                       "availability_events": [...]}.
  static ClusterState from_json(const nlohmann::json& j,
                                const AgentLibrary& library) {
    ClusterState cluster;
    try {
      int node_index = 0;
      for (const auto& node : j.at("nodes")) {
        for (const auto& sku : node.at("skus")) {
          const std::string sku_id = sku.at("sku_id").get<std::string>();
          if (!library.sku(sku_id))
            throw DanglingReferenceError("cluster references unknown sku '" +
                                         sku_id + "'");
          cluster.add_pool(sku_id, node_index, sku.at("units").get<int>());
        }
        ++node_index;
      }
      for (const auto& e : j.value("availability_events", nlohmann::json::array()))
        cluster.availability_events_.push_back(e.get<AvailabilityEvent>());
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("malformed cluster config: ") + e.what());
    }
    std::sort(cluster.availability_events_.begin(),
              cluster.availability_events_.end(),
              [](const AvailabilityEvent& a, const AvailabilityEvent& b) {
                return a.time_us < b.time_us;
              });
    return cluster;
  }

  static ClusterState load(const std::string& path, const AgentLibrary& library) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open cluster config '" + path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("cluster config '" + path + "': " + e.what());
    }
    return from_json(j, library);
  }

  void add_availability_event(AvailabilityEvent event) {
    availability_events_.push_back(std::move(event));
    std::sort(availability_events_.begin(), availability_events_.end(),
              [](const AvailabilityEvent& a, const AvailabilityEvent& b) {
                return a.time_us < b.time_us;
              });
  }

  const std::vector<HardwarePool>& pools() const { return pools_; }
  const std::vector<AvailabilityEvent>& availability_events() const {
    return availability_events_;
  }
  const std::vector<ClusterLogEntry>& log() const { return log_; }

  HardwarePool* pool(const std::string& key) {
    for (auto& p : pools_)
      if (p.key() == key) return &p;
    return nullptr;
  }

  int total_capacity(const std::string& sku) const {
    int total = 0;
    for (const auto& p : pools_)
      if (p.sku == sku) total += p.capacity;
    return total;
  }

  int max_pool_capacity(const std::string& sku) const {
    int best = 0;
    for (const auto& p : pools_)
      if (p.sku == sku) best = std::max(best, p.capacity);
    return best;
  }

  // Allocates `units` of `sku` in preference order: warm pools first, then the
  // pool left with the largest free block, then pool key order.
  AllocationHandle allocate(const std::string& sku, int units,
                            const std::string& implementation, Micros time_us) {
    int best = -1;
    bool best_warm = false;
    int best_free_after = -1;
    for (std::size_t i = 0; i < pools_.size(); ++i) {
      const auto& p = pools_[i];
      if (p.sku != sku || p.free_units() < units) continue;
      auto warm_it = p.warm_free.find(implementation);
      const bool warm = warm_it != p.warm_free.end() && warm_it->second >= units;
      const int free_after = p.free_units() - units;
      if (best < 0 || (warm && !best_warm) ||
          (warm == best_warm && free_after > best_free_after)) {
        best = static_cast<int>(i);
        best_warm = warm;
        best_free_after = free_after;
      }
    }
    if (best < 0)
      throw InsufficientCapacityError("no pool of sku '" + sku + "' has " +
                                      std::to_string(units) + " free units");
    return allocate_in(pools_[static_cast<std::size_t>(best)].key(), units,
                       implementation, time_us);
  }

  AllocationHandle allocate_in(const std::string& pool_key, int units,
                               const std::string& implementation,
                               Micros time_us) {
    HardwarePool* p = pool(pool_key);
    if (!p) throw InsufficientCapacityError("unknown pool '" + pool_key + "'");
    if (p->free_units() < units)
      throw InsufficientCapacityError("pool '" + pool_key + "' has only " +
                                      std::to_string(p->free_units()) +
                                      " free units, need " +
                                      std::to_string(units));

    auto warm_it = p->warm_free.find(implementation);
    const int warm_available = warm_it == p->warm_free.end() ? 0 : warm_it->second;
    const bool fully_warm = warm_available >= units;
    const int warm_taken = std::min(warm_available, units);
    if (warm_taken > 0) {
      warm_it->second -= warm_taken;
      if (warm_it->second == 0) p->warm_free.erase(warm_it);
    }
    int cold_needed = units - warm_taken;
    // Cold demand prefers unwarmed free units, then evicts other
    // implementations' warm units in name order.
    const int unwarmed_free = p->free_units() - p->warm_free_total() - warm_taken >= 0
                                  ? p->free_units() - p->warm_free_total() - warm_taken
                                  : 0;
    cold_needed -= std::min(cold_needed, unwarmed_free);
    for (auto it = p->warm_free.begin(); it != p->warm_free.end() && cold_needed > 0;) {
      const int evicted = std::min(it->second, cold_needed);
      it->second -= evicted;
      cold_needed -= evicted;
      it = it->second == 0 ? p->warm_free.erase(it) : std::next(it);
    }

    p->allocated += units;
    Allocation alloc;
    alloc.id = next_allocation_id_++;
    alloc.pool_key = pool_key;
    alloc.sku = p->sku;
    alloc.node_index = p->node_index;
    alloc.units = units;
    alloc.implementation = implementation;
    alloc.since_us = time_us;
    alloc.warm = fully_warm;
    alloc.active = true;
    allocations_[alloc.id] = alloc;
    log_.push_back({time_us, "alloc", pool_key, units, 0, alloc.id});
    return {alloc.id};
  }

  // Released units stay warm for the implementation until another
  // implementation claims them.
  void release(AllocationHandle handle, Micros time_us) {
    auto it = allocations_.find(handle.id);
    if (it == allocations_.end() || !it->second.active)
      throw DoubleReleaseError("allocation " + std::to_string(handle.id) +
                               " is not active");
    Allocation& alloc = it->second;
    alloc.active = false;
    HardwarePool* p = pool(alloc.pool_key);
    p->allocated -= alloc.units;
    p->warm_free[alloc.implementation] += alloc.units;
    log_.push_back({time_us, "release", alloc.pool_key, -alloc.units, 0, alloc.id});
  }

  const Allocation& allocation(AllocationHandle handle) const {
    return allocations_.at(handle.id);
  }

  int active_allocation_units() const {
    int total = 0;
    for (const auto& [id, a] : allocations_)
      if (a.active) total += a.units;
    return total;
  }

  // Applies a grant or revocation. Revocations preempt newest-first when free
  // capacity is insufficient; preempted allocations are returned so the
  // runtime can re-queue their chunks.
  std::vector<Allocation> apply_availability(const AvailabilityEvent& event) {
    std::vector<Allocation> preempted;
    if (event.kind == AvailabilityEvent::Kind::spot_grant) {
      if (event.delta_units < 0)
        throw ValidationError("spot_grant must carry a non-negative delta");
      HardwarePool* target = nullptr;
      for (auto& p : pools_)
        if (p.sku == event.sku && !target) target = &p;
      if (!target) {
        add_pool(event.sku, 0, 0);
        target = pool(event.sku + "@n0");
      }
      target->capacity += event.delta_units;
      log_.push_back(
          {event.time_us, "grant", target->key(), 0, event.delta_units, -1});
      return preempted;
    }

    int remaining = -std::min(event.delta_units, 0);
    if (event.delta_units > 0) remaining = event.delta_units;
    // Shrink free capacity first, draining the pools with the most headroom.
    while (remaining > 0) {
      HardwarePool* best = nullptr;
      for (auto& p : pools_) {
        if (p.sku != event.sku || p.capacity == 0) continue;
        if (!best || p.free_units() > best->free_units()) best = &p;
      }
      if (!best) break;
      if (best->free_units() > 0) {
        const int cut = std::min(best->free_units(), remaining);
        shrink_free(*best, cut, event.time_us);
        remaining -= cut;
        continue;
      }
      // No free units anywhere: preempt the newest allocation of this sku.
      std::int64_t victim = -1;
      for (const auto& [id, a] : allocations_)
        if (a.active && a.sku == event.sku) victim = std::max(victim, id);
      if (victim < 0) break;
      Allocation& alloc = allocations_[victim];
      HardwarePool* p = pool(alloc.pool_key);
      alloc.active = false;
      p->allocated -= alloc.units;
      log_.push_back({event.time_us, "preempt", alloc.pool_key, -alloc.units, 0,
                      alloc.id});
      preempted.push_back(alloc);
      const int cut = std::min(alloc.units, remaining);
      p->capacity -= cut;
      log_.push_back({event.time_us, "revoke", p->key(), 0, -cut, -1});
      remaining -= cut;
    }
    return preempted;
  }

  // Pure read of per-pool free/allocated/warm state.
  UtilizationReport snapshot_stats(Micros time_us) const {
    UtilizationReport report;
    report.time_us = time_us;
    for (const auto& p : pools_) {
      PoolStats stats;
      stats.sku = p.sku;
      stats.node_index = p.node_index;
      stats.capacity = p.capacity;
      stats.allocated = p.allocated;
      stats.free_units = p.free_units();
      stats.warm_by_implementation = p.warm_free;
      report.pools.push_back(std::move(stats));
    }
    return report;
  }

  // Re-targets warm idle units whose implementation has no pending work
  // anywhere in the given DAGs. Each pending capability justifies at most one
  // re-warm; targets are chosen by largest pending work, then name.
  std::vector<WarmSetChange> rebalance_with_lookahead(
      const std::vector<const WorkflowDag*>& pending, const AgentLibrary& library,
      Micros time_us) {
    std::map<std::string, double> pending_work;  // capability -> work units
    for (const WorkflowDag* dag : pending)
      for (const auto& node : dag->nodes)
        pending_work[node.capability] += node.work_units;

    // Capabilities that still lack a warm set, ranked by pending work.
    std::map<std::string, bool> capability_warm;
    for (const auto& p : pools_)
      for (const auto& [impl_name, units] : p.warm_free) {
        const Implementation* impl = library.implementation(impl_name);
        if (impl && units > 0) capability_warm[impl->capability] = true;
      }

    std::vector<WarmSetChange> changes;
    for (auto& p : pools_) {
      std::vector<std::string> idle_impls;
      for (const auto& [impl_name, units] : p.warm_free)
        if (units > 0) idle_impls.push_back(impl_name);
      for (const auto& impl_name : idle_impls) {
        const Implementation* impl = library.implementation(impl_name);
        if (!impl) continue;
        const auto it = pending_work.find(impl->capability);
        if (it != pending_work.end() && it->second > 0) continue;  // justified

        // Pick the neediest compatible capability without a warm set yet.
        const Implementation* target = nullptr;
        double target_work = 0.0;
        for (const auto& [capability, work] : pending_work) {
          if (work <= 0 || capability_warm[capability]) continue;
          for (const Implementation* candidate :
               library.implementations_for(capability)) {
            if (!candidate->supported_classes.count(
                    library.sku(p.sku)->hardware_class))
              continue;
            if (!target || work > target_work ||
                (work == target_work && candidate->name < target->name)) {
              target = candidate;
              target_work = work;
            }
            break;  // implementations_for is sorted best-first
          }
        }
        if (!target) continue;

        const int units = p.warm_free[impl_name];
        p.warm_free.erase(impl_name);
        p.warm_free[target->name] += units;
        capability_warm[target->capability] = true;
        changes.push_back({p.key(), impl_name, target->name, units});
        log_.push_back({time_us, "rewarm", p.key(), 0, 0, -1});
      }
    }
    return changes;
  }

 private:
  void sort_pools() {
    std::sort(pools_.begin(), pools_.end(),
              [](const HardwarePool& a, const HardwarePool& b) {
                if (a.sku != b.sku) return a.sku < b.sku;
                return a.node_index < b.node_index;
              });
  }

  void shrink_free(HardwarePool& p, int cut, Micros time_us) {
    p.capacity -= cut;
    // Capacity leaves cold-free units first, then warm ones in name order.
    int excess_warm = p.warm_free_total() - p.free_units();
    for (auto it = p.warm_free.begin(); it != p.warm_free.end() && excess_warm > 0;) {
      const int removed = std::min(it->second, excess_warm);
      it->second -= removed;
      excess_warm -= removed;
      it = it->second == 0 ? p.warm_free.erase(it) : std::next(it);
    }
    log_.push_back({time_us, "revoke", p.key(), 0, -cut, -1});
  }

  std::vector<HardwarePool> pools_;
  std::vector<AvailabilityEvent> availability_events_;
  std::map<std::int64_t, Allocation> allocations_;
  std::vector<ClusterLogEntry> log_;
  std::int64_t next_allocation_id_ = 0;
};

}  // namespace loom
