#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "loom/config.hpp"
#include "loom/errors.hpp"

namespace loom {

// ---------------------------------------------------------------------------
// Media kinds and data items
// ---------------------------------------------------------------------------

enum class MediaKind { video, audio, image, text, embedding };

inline const char* to_string(MediaKind k) {
  switch (k) {
    case MediaKind::video: return "video";
    case MediaKind::audio: return "audio";
    case MediaKind::image: return "image";
    case MediaKind::text: return "text";
    case MediaKind::embedding: return "embedding";
  }
  return "?";
}

inline MediaKind media_kind_from_string(const std::string& s) {
  if (s == "video") return MediaKind::video;
  if (s == "audio") return MediaKind::audio;
  if (s == "image") return MediaKind::image;
  if (s == "text") return MediaKind::text;
  if (s == "embedding") return MediaKind::embedding;
  throw SchemaError("unknown media_kind '" + s + "'");
}

inline const std::vector<MediaKind>& all_media_kinds() {
  static const std::vector<MediaKind> kinds = {
      MediaKind::video, MediaKind::audio, MediaKind::image, MediaKind::text,
      MediaKind::embedding};
  return kinds;
}

// A unit of data flowing through a workflow. work_units are kind-specific:
// seconds for video/audio, counts for images, tokens for text.
struct DataItem {
  std::string id;
  MediaKind media_kind = MediaKind::video;
  double work_units = 0.0;

  bool operator==(const DataItem&) const = default;
};

// ---------------------------------------------------------------------------
// Objectives
// ---------------------------------------------------------------------------

enum class Criterion { min_cost_dollars, min_energy, min_latency, max_quality };

inline const char* to_string(Criterion c) {
  switch (c) {
    case Criterion::min_cost_dollars: return "min_cost_dollars";
    case Criterion::min_energy: return "min_energy";
    case Criterion::min_latency: return "min_latency";
    case Criterion::max_quality: return "max_quality";
  }
  return "?";
}

// Ordered list of criteria; ties at position k fall through to k+1, residual
// ties break on the lexicographic config identifier.
struct ObjectiveHierarchy {
  std::vector<Criterion> criteria;
  std::optional<int> quality_floor;

  bool operator==(const ObjectiveHierarchy&) const = default;
};

// Maps a spec-file constraint token to an objective hierarchy. MIN_COST ranks
// by measured accelerator energy first: the cheapest execution is the one
// burning the least of the dominant power draw.
inline ObjectiveHierarchy objective_from_token(const std::string& token) {
  ObjectiveHierarchy h;
  if (token == "MIN_COST") {
    h.criteria = {Criterion::min_energy, Criterion::min_latency};
  } else if (token == "MIN_DOLLARS") {
    h.criteria = {Criterion::min_cost_dollars, Criterion::min_latency};
  } else if (token == "MIN_LATENCY") {
    h.criteria = {Criterion::min_latency, Criterion::min_energy};
  } else if (token == "MAX_QUALITY") {
    h.criteria = {Criterion::max_quality, Criterion::min_energy,
                  Criterion::min_latency};
  } else {
    throw SchemaError("unknown constraint token '" + token + "'");
  }
  return h;
}

// ---------------------------------------------------------------------------
// Job specification
// ---------------------------------------------------------------------------

enum class JobMode { declarative, pinned };

struct JobSpec {
  std::string description;
  std::vector<std::string> task_hints;
  std::vector<DataItem> inputs;
  std::string constraint_token;  // as written in the spec file
  ObjectiveHierarchy objective;
  JobMode mode = JobMode::declarative;
  std::optional<ConfigPoint> pinned_plan;

  bool operator==(const JobSpec&) const = default;
};

inline void to_json(nlohmann::json& j, const DataItem& d) {
  j = nlohmann::json{{"id", d.id},
                     {"media_kind", to_string(d.media_kind)},
                     {"work_units", d.work_units}};
}

inline void from_json(const nlohmann::json& j, DataItem& d) {
  d.id = j.at("id").get<std::string>();
  d.media_kind = media_kind_from_string(j.at("media_kind").get<std::string>());
  d.work_units = j.at("work_units").get<double>();
}

inline nlohmann::json to_json(const JobSpec& spec) {
  nlohmann::json j{{"description", spec.description},
                   {"tasks", spec.task_hints},
                   {"inputs", spec.inputs},
                   {"constraint", spec.constraint_token},
                   {"mode", spec.mode == JobMode::pinned ? "pinned" : "declarative"}};
  if (spec.objective.quality_floor)
    j["quality_floor"] = *spec.objective.quality_floor;
  if (spec.pinned_plan) j["pinned_plan"] = *spec.pinned_plan;
  return j;
}

// Parses and validates a workflow spec file. SchemaError for malformed
// documents, ValidationError (with a field path) for invariant violations.
inline JobSpec parse_job_spec(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("spec file is not valid JSON: ") + e.what());
  }

  JobSpec spec;
  try {
    spec.description = j.at("description").get<std::string>();
    spec.task_hints = j.value("tasks", std::vector<std::string>{});
    spec.inputs = j.at("inputs").get<std::vector<DataItem>>();
    spec.constraint_token = j.at("constraint").get<std::string>();
    const std::string mode = j.value("mode", "declarative");
    if (mode == "declarative") {
      spec.mode = JobMode::declarative;
    } else if (mode == "pinned") {
      spec.mode = JobMode::pinned;
    } else {
      throw SchemaError("mode must be 'declarative' or 'pinned', got '" + mode +
                        "'");
    }
    if (j.contains("pinned_plan"))
      spec.pinned_plan = parse_config_point(j.at("pinned_plan"));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("spec file: ") + e.what());
  }

  spec.objective = objective_from_token(spec.constraint_token);
  if (j.contains("quality_floor"))
    spec.objective.quality_floor = j.at("quality_floor").get<int>();

  if (spec.description.empty())
    throw ValidationError("description: must be non-empty");
  if (spec.inputs.empty()) throw ValidationError("inputs: must be non-empty");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < spec.inputs.size(); ++i) {
    const auto& item = spec.inputs[i];
    const std::string path = "inputs[" + std::to_string(i) + "]";
    if (item.id.empty()) throw ValidationError(path + ".id: must be non-empty");
    if (item.work_units < 0)
      throw ValidationError(path + ".work_units: must be >= 0");
    if (!ids.insert(item.id).second)
      throw ValidationError(path + ".id: duplicate id '" + item.id + "'");
  }
  if (spec.mode == JobMode::pinned && !spec.pinned_plan)
    throw ValidationError("pinned_plan: required when mode is 'pinned'");
  return spec;
}

inline std::string serialize_job_spec(const JobSpec& spec) {
  return to_json(spec).dump(2);
}

// ---------------------------------------------------------------------------
// Tool calls
// ---------------------------------------------------------------------------

using ArgValue = std::variant<double, std::int64_t, std::string>;

// A concrete, executable invocation of an agent, with every schema argument
// bound from item metadata or lexicon defaults.
struct ToolCall {
  std::string capability;
  std::map<std::string, ArgValue> arguments;
  std::string target_item;

  bool operator==(const ToolCall&) const = default;
};

inline void to_json(nlohmann::json& j, const ToolCall& t) {
  nlohmann::json args = nlohmann::json::object();
  for (const auto& [name, value] : t.arguments) {
    if (std::holds_alternative<double>(value)) {
      args[name] = std::get<double>(value);
    } else if (std::holds_alternative<std::int64_t>(value)) {
      args[name] = std::get<std::int64_t>(value);
    } else {
      args[name] = std::get<std::string>(value);
    }
  }
  j = nlohmann::json{{"capability", t.capability},
                     {"arguments", args},
                     {"target_item", t.target_item}};
}

inline void from_json(const nlohmann::json& j, ToolCall& t) {
  t.capability = j.at("capability").get<std::string>();
  t.target_item = j.at("target_item").get<std::string>();
  for (const auto& [name, value] : j.at("arguments").items()) {
    if (value.is_string()) {
      t.arguments[name] = value.get<std::string>();
    } else if (value.is_number_integer()) {
      t.arguments[name] = value.get<std::int64_t>();
    } else {
      t.arguments[name] = value.get<double>();
    }
  }
}

// ---------------------------------------------------------------------------
// Workflow DAG
// ---------------------------------------------------------------------------

enum class NodeOrigin { hinted, inferred };

struct DagNode {
  std::string id;
  std::string capability;
  double work_units = 0.0;
  bool splittable = false;
  double min_chunk = 0.0;  // > 0 required when splittable
  bool multi_path = false;
  std::optional<int> path_quality_ceiling;
  NodeOrigin origin = NodeOrigin::hinted;
  std::vector<MediaKind> consumes;
  MediaKind produces = MediaKind::text;
  std::vector<ToolCall> tool_calls;

  bool operator==(const DagNode&) const = default;
};

struct Edge {
  std::string from;
  std::string to;
  MediaKind kind = MediaKind::text;

  bool operator==(const Edge&) const = default;
};

struct WorkflowDag {
  std::vector<DagNode> nodes;
  std::vector<Edge> edges;

  const DagNode* find(const std::string& id) const {
    for (const auto& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }

  std::vector<const Edge*> in_edges(const std::string& id) const {
    std::vector<const Edge*> result;
    for (const auto& e : edges)
      if (e.to == id) result.push_back(&e);
    return result;
  }

  bool operator==(const WorkflowDag&) const = default;
};

inline void to_json(nlohmann::json& j, const DagNode& n) {
  j = nlohmann::json{{"id", n.id},
                     {"capability", n.capability},
                     {"work_units", n.work_units},
                     {"splittable", n.splittable},
                     {"min_chunk", n.min_chunk},
                     {"multi_path", n.multi_path},
                     {"origin", n.origin == NodeOrigin::hinted ? "hinted" : "inferred"},
                     {"produces", to_string(n.produces)},
                     {"tool_calls", n.tool_calls}};
  nlohmann::json consumes = nlohmann::json::array();
  for (auto k : n.consumes) consumes.push_back(to_string(k));
  j["consumes"] = consumes;
  if (n.path_quality_ceiling) j["path_quality_ceiling"] = *n.path_quality_ceiling;
}

inline void from_json(const nlohmann::json& j, DagNode& n) {
  n.id = j.at("id").get<std::string>();
  n.capability = j.at("capability").get<std::string>();
  n.work_units = j.at("work_units").get<double>();
  n.splittable = j.at("splittable").get<bool>();
  n.min_chunk = j.value("min_chunk", 0.0);
  n.multi_path = j.value("multi_path", false);
  n.origin = j.value("origin", "hinted") == std::string("inferred")
                 ? NodeOrigin::inferred
                 : NodeOrigin::hinted;
  n.produces = media_kind_from_string(j.at("produces").get<std::string>());
  for (const auto& k : j.at("consumes"))
    n.consumes.push_back(media_kind_from_string(k.get<std::string>()));
  if (j.contains("path_quality_ceiling"))
    n.path_quality_ceiling = j.at("path_quality_ceiling").get<int>();
  if (j.contains("tool_calls"))
    n.tool_calls = j.at("tool_calls").get<std::vector<ToolCall>>();
}

inline void to_json(nlohmann::json& j, const Edge& e) {
  j = nlohmann::json{{"from", e.from}, {"to", e.to}, {"kind", to_string(e.kind)}};
}

inline void from_json(const nlohmann::json& j, Edge& e) {
  e.from = j.at("from").get<std::string>();
  e.to = j.at("to").get<std::string>();
  e.kind = media_kind_from_string(j.at("kind").get<std::string>());
}

inline void to_json(nlohmann::json& j, const WorkflowDag& d) {
  j = nlohmann::json{{"nodes", d.nodes}, {"edges", d.edges}};
}

inline void from_json(const nlohmann::json& j, WorkflowDag& d) {
  d.nodes = j.at("nodes").get<std::vector<DagNode>>();
  d.edges = j.at("edges").get<std::vector<Edge>>();
}

inline WorkflowDag parse_dag(const std::string& text) {
  try {
    return nlohmann::json::parse(text).get<WorkflowDag>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed dag file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Validation and ordering
// ---------------------------------------------------------------------------

struct Violation {
  std::string rule;  // "cycle", "kind_mismatch", "orphan", ...
  std::string message;
  std::vector<std::string> nodes;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }

  bool has(const std::string& rule) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.rule == rule; });
  }
};

// Collects every invariant violation; violations are data, not exceptions.
inline ValidationReport validate_dag(const WorkflowDag& dag) {
  ValidationReport report;
  auto add = [&](std::string rule, std::string message,
                 std::vector<std::string> nodes = {}) {
    report.violations.push_back({std::move(rule), std::move(message), std::move(nodes)});
  };

  std::map<std::string, const DagNode*> by_id;
  for (const auto& n : dag.nodes) {
    if (!by_id.emplace(n.id, &n).second)
      add("duplicate_id", "duplicate node id '" + n.id + "'", {n.id});
    if (n.work_units <= 0)
      add("work_units", "node '" + n.id + "' has non-positive work_units", {n.id});
    if (n.splittable && n.min_chunk <= 0)
      add("min_chunk", "splittable node '" + n.id + "' must declare min_chunk > 0",
          {n.id});
  }

  for (const auto& e : dag.edges) {
    auto from = by_id.find(e.from);
    auto to = by_id.find(e.to);
    if (from == by_id.end()) {
      add("dangling_edge", "edge references unknown node '" + e.from + "'",
          {e.from});
      continue;
    }
    if (to == by_id.end()) {
      add("dangling_edge", "edge references unknown node '" + e.to + "'", {e.to});
      continue;
    }
    if (from->second->produces != e.kind) {
      add("kind_mismatch",
          "edge " + e.from + "->" + e.to + " carries " +
              std::string(to_string(e.kind)) + " but producer emits " +
              to_string(from->second->produces),
          {e.from, e.to});
    }
    const auto& consumed = to->second->consumes;
    if (std::find(consumed.begin(), consumed.end(), e.kind) == consumed.end()) {
      add("kind_mismatch",
          "edge " + e.from + "->" + e.to + " carries " +
              std::string(to_string(e.kind)) + " which consumer does not accept",
          {e.from, e.to});
    }
  }

  // Kahn pass: detects cycles and, transitively, nodes unreachable from any
  // source.
  std::map<std::string, int> indegree;
  for (const auto& n : dag.nodes) indegree[n.id] = 0;
  for (const auto& e : dag.edges) {
    if (by_id.count(e.from) && by_id.count(e.to)) indegree[e.to]++;
  }
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> queue;
  for (const auto& [id, deg] : indegree)
    if (deg == 0) queue.push(id);
  std::size_t processed = 0;
  while (!queue.empty()) {
    const std::string id = queue.top();
    queue.pop();
    ++processed;
    for (const auto& e : dag.edges) {
      if (e.from != id || !indegree.count(e.to)) continue;
      if (--indegree[e.to] == 0) queue.push(e.to);
    }
  }
  if (processed != indegree.size()) {
    std::vector<std::string> stuck;
    for (const auto& [id, deg] : indegree)
      if (deg > 0) stuck.push_back(id);
    add("cycle", "cycle detected", stuck);
    for (const auto& id : stuck)
      add("orphan", "node '" + id + "' is not reachable from any source", {id});
  }

  return report;
}

// Deterministic topological order: producers before consumers, peers sorted by
// node id.
inline std::vector<std::string> topological_order(const WorkflowDag& dag) {
  std::map<std::string, int> indegree;
  std::map<std::string, std::vector<std::string>> adjacency;
  for (const auto& n : dag.nodes) indegree[n.id] = 0;
  for (const auto& e : dag.edges) {
    if (!indegree.count(e.from) || !indegree.count(e.to))
      throw CycleError("edge references unknown node");
    adjacency[e.from].push_back(e.to);
    indegree[e.to]++;
  }

  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [id, deg] : indegree)
    if (deg == 0) ready.push(id);

  std::vector<std::string> order;
  order.reserve(dag.nodes.size());
  while (!ready.empty()) {
    const std::string id = ready.top();
    ready.pop();
    order.push_back(id);
    for (const auto& next : adjacency[id])
      if (--indegree[next] == 0) ready.push(next);
  }
  if (order.size() != dag.nodes.size()) {
    std::string stuck;
    for (const auto& [id, deg] : indegree)
      if (deg > 0) stuck += (stuck.empty() ? "" : ", ") + id;
    throw CycleError("dag has a cycle involving: " + stuck);
  }
  return order;
}

}  // namespace loom
