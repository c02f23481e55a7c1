// Command-line front end: lowers a workflow spec, selects a configuration and
// simulates it on a cluster, emitting dag.json, chosen_config.json,
// trace.jsonl and summary.csv.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "loom/loom.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string spec_path;
  std::string cluster_path;
  std::string profiles_path;
  std::string lexicon_path;
  std::string out_dir;
  std::string search_mode = "greedy";
  std::uint64_t seed = 0;
  int max_fanout = 4;
  int max_paths = 2;
  double planner_overhead_pct = 1.0;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--cluster", flags.cluster_path, "Cluster config JSON")
      ->required();
  cmd->add_option("--profiles", flags.profiles_path,
                  "Library bundle JSON (skus, agents, implementations, profiles)")
      ->required();
  cmd->add_option("--lexicon", flags.lexicon_path, "Capability lexicon JSON")
      ->required();
  cmd->add_option("--out", flags.out_dir, "Output directory")->required();
  cmd->add_option("--search", flags.search_mode, "Search mode: greedy|exhaustive")
      ->check(CLI::IsMember({"greedy", "exhaustive"}));
  cmd->add_option("--seed", flags.seed, "Simulation seed (echoed into outputs)");
  cmd->add_option("--max-fanout", flags.max_fanout, "Fan-out bound per node");
  cmd->add_option("--max-paths", flags.max_paths, "Execution-path bound per node");
  cmd->add_option("--planner-overhead-pct", flags.planner_overhead_pct,
                  "Simulated DAG-creation overhead, % of predicted makespan");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw loom::SchemaError("cannot open file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw loom::SchemaError("cannot write file '" + path.string() + "'");
  out << content;
}

loom::SearchBounds bounds_for(const CommonFlags& flags,
                              const loom::ClusterState& cluster,
                              const loom::AgentLibrary& library) {
  loom::SearchBounds bounds;
  bounds.max_fanout = flags.max_fanout;
  bounds.max_paths = flags.max_paths;
  for (const loom::HardwareSku* sku : library.skus()) {
    bounds.sku_pool_cap[sku->id] = cluster.max_pool_capacity(sku->id);
    bounds.sku_total_cap[sku->id] = cluster.total_capacity(sku->id);
  }
  return bounds;
}

std::string summary_header() {
  return "config_label,makespan_s,gpu_wh,cpu_wh,total_wh,dollars,quality,seed";
}

std::string summary_row(const std::string& label, const loom::RunMetrics& m,
                        std::uint64_t seed) {
  std::ostringstream row;
  row << label << "," << loom::format_seconds(m.makespan_us) << ","
      << loom::format_fixed(m.gpu_wh) << "," << loom::format_fixed(m.cpu_wh)
      << "," << loom::format_fixed(m.total_wh) << ","
      << loom::format_fixed(m.dollars) << "," << m.quality << "," << seed;
  return row.str();
}

struct RunOutcome {
  std::string label;
  loom::RunMetrics metrics;
};

// Plans, selects and simulates one workflow; writes all artifacts under
// out_dir and returns the metrics for reporting.
RunOutcome run_workflow(const CommonFlags& flags, const std::string& spec_path,
                        const std::optional<std::string>& pin_path,
                        const std::optional<std::string>& row_label,
                        const fs::path& out_dir) {
  const loom::JobSpec spec = loom::parse_job_spec(read_file(spec_path));
  loom::AgentLibrary library = loom::AgentLibrary::load(flags.profiles_path);
  library.freeze();
  const loom::CapabilityLexicon lexicon =
      loom::CapabilityLexicon::load(flags.lexicon_path);
  for (const loom::LexiconEntry* entry : lexicon.concrete_entries()) {
    if (!library.agent(entry->capability))
      throw loom::DanglingReferenceError("lexicon capability '" +
                                         entry->capability +
                                         "' has no registered agent");
  }
  loom::ClusterState cluster = loom::ClusterState::load(flags.cluster_path, library);

  const loom::LexiconPlanner planner;
  const loom::WorkflowDag dag = planner.plan(spec, lexicon, library);

  fs::create_directories(out_dir);
  write_file(out_dir / "dag.json", nlohmann::json(dag).dump(2) + "\n");

  loom::ConfigPoint config;
  std::string label;
  if (pin_path) {
    config = loom::parse_config_point(
        nlohmann::json::parse(read_file(*pin_path)));
    label = config.label.empty() ? fs::path(*pin_path).stem().string()
                                 : config.label;
  } else if (spec.mode == loom::JobMode::pinned) {
    config = *spec.pinned_plan;
    for (const auto& node : dag.nodes) {
      if (!config.nodes.count(node.id))
        throw loom::ValidationError("pinned_plan: missing assignment for task '" +
                                    node.id + "'");
    }
    label = config.label.empty() ? "pinned" : config.label;
  } else {
    const loom::SearchBounds bounds = bounds_for(flags, cluster, library);
    const loom::ConfigEstimate chosen =
        flags.search_mode == "exhaustive"
            ? loom::exhaustive_search(dag, library, spec.objective, bounds)
            : loom::greedy_search(dag, library, spec.objective, bounds);
    config = chosen.config;
    label = "selected";
  }
  if (row_label) label = *row_label;
  config.label = label;
  write_file(out_dir / "chosen_config.json", nlohmann::json(config).dump(2) + "\n");

  const loom::ConfigEstimate predicted = loom::estimate(config, dag, library);
  loom::SimOptions options;
  options.seed = flags.seed;
  options.planner_overhead_us = static_cast<loom::Micros>(
      std::llround(predicted.latency_us * flags.planner_overhead_pct / 100.0));

  loom::Simulator simulator;
  loom::SimResult result =
      simulator.execute(dag, config, std::move(cluster), library, options);

  write_file(out_dir / "trace.jsonl",
             loom::serialize_trace(result.trace, result.metrics, flags.seed));
  write_file(out_dir / "summary.csv",
             summary_header() + "\n" + summary_row(label, result.metrics, flags.seed) +
                 "\n");
  return {label, result.metrics};
}

int cmd_run(const CommonFlags& flags, const std::optional<std::string>& pin) {
  const RunOutcome outcome =
      run_workflow(flags, flags.spec_path, pin, std::nullopt, flags.out_dir);
  std::cout << summary_header() << "\n"
            << summary_row(outcome.label, outcome.metrics, flags.seed) << "\n";
  return 0;
}

int cmd_compare(const CommonFlags& flags, const std::string& baseline_spec,
                const std::vector<std::string>& pins) {
  const fs::path out_root(flags.out_dir);
  std::vector<std::pair<std::string, loom::RunMetrics>> rows;

  const RunOutcome baseline = run_workflow(flags, baseline_spec, std::nullopt,
                                           std::nullopt, out_root / "baseline");
  rows.emplace_back(baseline.label, baseline.metrics);

  const RunOutcome chosen = run_workflow(flags, flags.spec_path, std::nullopt,
                                         std::nullopt, out_root / "selected");
  rows.emplace_back(chosen.label, chosen.metrics);

  for (const auto& pin : pins) {
    std::string label;
    std::string path = pin;
    if (const auto eq = pin.find('='); eq != std::string::npos) {
      label = pin.substr(0, eq);
      path = pin.substr(eq + 1);
    } else {
      label = fs::path(pin).stem().string();
    }
    const RunOutcome outcome =
        run_workflow(flags, flags.spec_path, path, label, out_root / label);
    rows.emplace_back(outcome.label, outcome.metrics);
  }

  std::ostringstream report;
  report << summary_header() << "\n";
  for (const auto& [label, metrics] : rows)
    report << summary_row(label, metrics, flags.seed) << "\n";
  const double speedup = chosen.metrics.makespan_us == 0
                             ? 1.0
                             : loom::to_seconds(baseline.metrics.makespan_us) /
                                   loom::to_seconds(chosen.metrics.makespan_us);
  const double efficiency = chosen.metrics.gpu_wh == 0.0
                                ? 1.0
                                : baseline.metrics.gpu_wh / chosen.metrics.gpu_wh;
  report << "speedup=" << loom::format_fixed(speedup, 2) << "\n"
         << "energy_efficiency=" << loom::format_fixed(efficiency, 2) << "\n";

  write_file(out_root / "summary.csv", report.str());
  std::cout << report.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Declarative workflow orchestrator and cluster simulator"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  std::string pin_path;
  CLI::App* run = app.add_subcommand("run", "Plan, select and simulate one workflow");
  run->add_option("--spec", run_flags.spec_path, "Workflow spec JSON")->required();
  add_common_flags(run, run_flags);
  run->add_option("--pin", pin_path,
                  "Config-point JSON; bypasses the optimizer and runs it as-is");

  CommonFlags compare_flags;
  std::string baseline_spec;
  std::vector<std::string> compare_pins;
  CLI::App* compare =
      app.add_subcommand("compare", "Run a baseline and a declarative spec, "
                                    "report speedup and energy-efficiency ratios");
  compare->add_option("--baseline-spec", baseline_spec,
                      "Pinned-mode workflow spec used as the baseline")
      ->required();
  compare->add_option("--spec", compare_flags.spec_path,
                      "Declarative workflow spec")
      ->required();
  add_common_flags(compare, compare_flags);
  compare->add_option("--pin", compare_pins,
                      "Extra pinned rows, as label=path or path (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      std::optional<std::string> pin;
      if (!pin_path.empty()) pin = pin_path;
      return cmd_run(run_flags, pin);
    }
    return cmd_compare(compare_flags, baseline_spec, compare_pins);
  } catch (const loom::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
}
