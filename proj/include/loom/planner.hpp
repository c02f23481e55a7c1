#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "loom/agent_library.hpp"
#include "loom/errors.hpp"
#include "loom/lexicon.hpp"
#include "loom/workflow.hpp"

namespace loom {

struct DecomposedTask {
  std::string text;
  std::string capability;
};

namespace detail {

inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

// Case-insensitive token overlap: |hint tokens ∩ keyword set|.
inline int match_score(const std::vector<std::string>& tokens,
                       const std::vector<std::string>& keywords) {
  std::set<std::string> keyword_set;
  for (const auto& k : keywords) {
    for (const auto& t : tokenize(k)) keyword_set.insert(t);
  }
  std::set<std::string> seen;
  int score = 0;
  for (const auto& t : tokens) {
    if (keyword_set.count(t) && seen.insert(t).second) ++score;
  }
  return score;
}

inline const LexiconEntry* best_match(
    const std::string& text, const std::vector<const LexiconEntry*>& candidates,
    const char* what) {
  const auto tokens = tokenize(text);
  int best = 0;
  std::vector<const LexiconEntry*> winners;
  for (const auto* entry : candidates) {
    const int score = match_score(tokens, entry->keywords);
    if (score > best) {
      best = score;
      winners = {entry};
    } else if (score == best && score > 0) {
      winners.push_back(entry);
    }
  }
  if (best == 0 || winners.empty())
    throw UnmappableTaskError(std::string(what) + " '" + text +
                              "' matches no capability in the lexicon");
  if (winners.size() > 1) {
    std::string names;
    for (const auto* w : winners)
      names += (names.empty() ? "" : ", ") + w->capability;
    throw AmbiguousTaskError(std::string(what) + " '" + text +
                             "' matches several capabilities equally: " + names);
  }
  return winners.front();
}

}  // namespace detail

// Maps each task hint onto exactly one capability by keyword overlap; with no
// hints, matches the job description against whole-job templates and expands.
// Never invents tasks from hints: |output| == |hints|.
inline std::vector<DecomposedTask> decompose_job(
    const JobSpec& spec, const CapabilityLexicon& lexicon) {
  std::vector<DecomposedTask> tasks;
  if (!spec.task_hints.empty()) {
    const auto candidates = lexicon.concrete_entries();
    for (const auto& hint : spec.task_hints) {
      const auto* entry = detail::best_match(hint, candidates, "task hint");
      tasks.push_back({hint, entry->capability});
    }
    return tasks;
  }
  const auto templates = lexicon.template_entries();
  if (templates.empty())
    throw UnmappableTaskError(
        "no task hints given and the lexicon has no whole-job templates");
  const auto* tmpl =
      detail::best_match(spec.description, templates, "job description");
  for (const auto& capability : tmpl->expansion)
    tasks.push_back({capability, capability});
  return tasks;
}

// Builds the dataflow DAG: an edge P -> C exists iff P's produced kind is one
// of C's consumed kinds and P precedes C in task order. Raw job inputs feed
// every node consuming a matching kind.
inline WorkflowDag infer_edges(const std::vector<DecomposedTask>& tasks,
                               const std::vector<DataItem>& inputs,
                               const CapabilityLexicon& lexicon) {
  WorkflowDag dag;
  std::vector<double> produced_work(tasks.size(), 0.0);

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const LexiconEntry& entry = lexicon.at(tasks[i].capability);
    DagNode node;
    node.id = "t" + std::to_string(i) + "_" + entry.capability;
    node.capability = entry.capability;
    node.splittable = entry.splittable;
    node.min_chunk = entry.min_chunk;
    node.multi_path = entry.multi_path;
    node.path_quality_ceiling = entry.path_quality_ceiling;
    node.origin = tasks[i].text == tasks[i].capability ? NodeOrigin::inferred
                                                       : NodeOrigin::hinted;
    node.consumes = entry.consumes;
    node.produces = entry.produces;

    double work = 0.0;
    bool fed = false;
    for (const auto& item : inputs) {
      if (std::find(entry.consumes.begin(), entry.consumes.end(),
                    item.media_kind) != entry.consumes.end()) {
        work += item.work_units;
        fed = true;
      }
    }
    for (std::size_t p = 0; p < i; ++p) {
      const LexiconEntry& producer = lexicon.at(tasks[p].capability);
      if (std::find(entry.consumes.begin(), entry.consumes.end(),
                    producer.produces) != entry.consumes.end()) {
        dag.edges.push_back({dag.nodes[p].id, node.id, producer.produces});
        work += produced_work[p];
        fed = true;
      }
    }
    if (!fed)
      throw DisconnectedTaskError("task '" + tasks[i].text + "' (" +
                                  entry.capability +
                                  ") has no satisfiable input");
    node.work_units = work;
    produced_work[i] = work * entry.work_factor;
    dag.nodes.push_back(std::move(node));
  }

  const ValidationReport report = validate_dag(dag);
  if (!report.ok())
    throw KindConflictError("inferred dag violates invariants: " +
                            report.violations.front().message);
  return dag;
}

// Binds an agent's schema arguments from item metadata and lexicon defaults.
// Builtin bindings: file/source -> item id, start_time -> 0 (or default),
// end_time -> item work, num_frames -> round(work * frame_rate default).
inline ToolCall synthesize_tool_call(const DagNode& node, const DataItem& item,
                                     const AgentSpec& agent,
                                     const LexiconEntry& entry) {
  if (node.capability != agent.capability)
    throw SchemaBindingError("node '" + node.id + "' capability does not match "
                             "agent schema '" + agent.capability + "'");
  ToolCall call;
  call.capability = agent.capability;
  call.target_item = item.id;

  auto default_number = [&](const std::string& name) -> const double* {
    auto it = entry.defaults.find(name);
    if (it == entry.defaults.end()) return nullptr;
    return std::get_if<double>(&it->second);
  };

  for (const auto& arg : agent.schema) {
    bool bound = true;
    if (arg.name == "file" || arg.name == "source") {
      call.arguments[arg.name] = item.id;
    } else if (arg.name == "start_time") {
      const double* d = default_number("start_time");
      call.arguments[arg.name] = d ? *d : 0.0;
    } else if (arg.name == "end_time") {
      call.arguments[arg.name] = item.work_units;
    } else if (arg.name == "num_frames") {
      const double* rate = default_number("frame_rate");
      if (!rate) {
        bound = false;
      } else {
        call.arguments[arg.name] =
            static_cast<std::int64_t>(std::llround(item.work_units * *rate));
      }
    } else {
      auto it = entry.defaults.find(arg.name);
      if (it == entry.defaults.end()) {
        bound = false;
      } else if (const double* d = std::get_if<double>(&it->second)) {
        if (arg.kind == ArgKind::integer) {
          call.arguments[arg.name] = static_cast<std::int64_t>(std::llround(*d));
        } else {
          call.arguments[arg.name] = *d;
        }
      } else {
        call.arguments[arg.name] = std::get<std::string>(it->second);
      }
    }
    if (!bound && arg.required)
      throw SchemaBindingError("required argument '" + arg.name +
                               "' of agent '" + agent.capability +
                               "' has no source");
  }
  return call;
}

// Lowering interface; the bundled implementation is deterministic and
// lexicon-driven. An LLM-backed planner would implement the same interface.
class Planner {
 public:
  virtual ~Planner() = default;
  virtual WorkflowDag plan(const JobSpec& spec, const CapabilityLexicon& lexicon,
                           const AgentLibrary& library) const = 0;
};

class LexiconPlanner : public Planner {
 public:
  WorkflowDag plan(const JobSpec& spec, const CapabilityLexicon& lexicon,
                   const AgentLibrary& library) const override {
    const auto tasks = decompose_job(spec, lexicon);
    WorkflowDag dag = infer_edges(tasks, spec.inputs, lexicon);

    // Tool calls: one per (node, consumed item), raw inputs and upstream
    // products alike.
    std::map<std::string, DataItem> products;
    for (std::size_t i = 0; i < dag.nodes.size(); ++i) {
      const auto& node = dag.nodes[i];
      const LexiconEntry& entry = lexicon.at(node.capability);
      products[node.id] = DataItem{node.id + ".out", node.produces,
                                   node.work_units * entry.work_factor};
    }
    for (auto& node : dag.nodes) {
      const AgentSpec* agent = library.agent(node.capability);
      if (!agent)
        throw UnknownCapabilityError("capability '" + node.capability +
                                     "' has no registered agent");
      const LexiconEntry& entry = lexicon.at(node.capability);
      for (const auto& item : spec.inputs) {
        if (std::find(node.consumes.begin(), node.consumes.end(),
                      item.media_kind) != node.consumes.end())
          node.tool_calls.push_back(
              synthesize_tool_call(node, item, *agent, entry));
      }
      for (const auto* e : dag.in_edges(node.id))
        node.tool_calls.push_back(
            synthesize_tool_call(node, products.at(e->from), *agent, entry));
    }
    return dag;
  }
};

}  // namespace loom
