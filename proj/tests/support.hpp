#pragma once

// Shared fixtures and generators for the test suites.

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "loom/loom.hpp"

namespace test_support {

inline std::string fixture_dir() { return LOOM_FIXTURE_DIR; }

inline std::string fixture(const std::string& name) {
  return fixture_dir() + "/video_understanding/" + name;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

struct VideoFixture {
  loom::JobSpec spec;
  loom::AgentLibrary library;
  loom::CapabilityLexicon lexicon;
  loom::ClusterState cluster;
  loom::WorkflowDag dag;
};

inline VideoFixture load_video_fixture(const std::string& spec_file = "job_declarative.json") {
  VideoFixture f;
  f.spec = loom::parse_job_spec(read_file(fixture(spec_file)));
  f.library = loom::AgentLibrary::load(fixture("profiles.json"));
  f.lexicon = loom::CapabilityLexicon::load(fixture("lexicon.json"));
  f.cluster = loom::ClusterState::load(fixture("cluster.json"), f.library);
  f.dag = loom::LexiconPlanner{}.plan(f.spec, f.lexicon, f.library);
  return f;
}

inline loom::ConfigPoint load_pin(const std::string& name) {
  return loom::parse_config_point(nlohmann::json::parse(read_file(fixture(name))));
}

inline loom::SearchBounds fixture_bounds(const loom::ClusterState& cluster,
                                         const loom::AgentLibrary& library) {
  loom::SearchBounds bounds;
  for (const loom::HardwareSku* sku : library.skus()) {
    bounds.sku_pool_cap[sku->id] = cluster.max_pool_capacity(sku->id);
    bounds.sku_total_cap[sku->id] = cluster.total_capacity(sku->id);
  }
  return bounds;
}

// --------------------------------------------------------------------------
// Random scenario generation for property tests
// --------------------------------------------------------------------------

using Rng = std::mt19937_64;

// A small synthetic library: one chain of capabilities with 1-2
// implementations each and profiles on a cpu and a gpu sku.
struct RandomScenario {
  loom::AgentLibrary library;
  loom::WorkflowDag dag;
  loom::ClusterState cluster;
};

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Builds a random layered DAG whose node kinds chain so that validate_dag
// passes; every node has a distinct implementation so warm-state reuse never
// perturbs estimate/simulation agreement.
inline RandomScenario make_random_scenario(Rng& rng, int max_nodes,
                                           bool with_setup,
                                           bool ample_capacity) {
  RandomScenario s;

  loom::HardwareSku cpu;
  cpu.id = "sim-cpu";
  cpu.hardware_class = loom::HardwareClass::cpu;
  cpu.busy_watts_per_unit = uniform(rng, 5.0, 30.0);
  cpu.idle_watts_per_unit = cpu.busy_watts_per_unit * uniform(rng, 0.1, 0.5);
  cpu.dollars_per_unit_hour = uniform(rng, 0.01, 0.2);
  loom::HardwareSku gpu;
  gpu.id = "sim-gpu";
  gpu.hardware_class = loom::HardwareClass::gpu;
  gpu.busy_watts_per_unit = uniform(rng, 200.0, 500.0);
  gpu.idle_watts_per_unit = gpu.busy_watts_per_unit * uniform(rng, 0.1, 0.3);
  gpu.dollars_per_unit_hour = uniform(rng, 1.0, 5.0);
  s.library.register_sku(cpu);
  s.library.register_sku(gpu);

  const int node_count = uniform_int(rng, 1, max_nodes);
  const std::vector<loom::MediaKind> kinds = {
      loom::MediaKind::video, loom::MediaKind::image, loom::MediaKind::text,
      loom::MediaKind::embedding, loom::MediaKind::audio};

  for (int i = 0; i < node_count; ++i) {
    const std::string capability = "cap" + std::to_string(i);
    loom::AgentSpec agent;
    agent.capability = capability;
    agent.consumes = {kinds[static_cast<std::size_t>(i) % kinds.size()]};
    agent.produces = kinds[static_cast<std::size_t>(i + 1) % kinds.size()];
    s.library.register_agent(agent);

    const int impl_count = uniform_int(rng, 1, 2);
    for (int m = 0; m < impl_count; ++m) {
      loom::Implementation impl;
      impl.name = capability + "_impl" + std::to_string(m);
      impl.capability = capability;
      impl.quality = uniform_int(rng, 0, 3);
      impl.supported_classes = {loom::HardwareClass::cpu, loom::HardwareClass::gpu};
      s.library.register_implementation(impl);
      for (const auto& sku_id : {std::string("sim-cpu"), std::string("sim-gpu")}) {
        const int variants = uniform_int(rng, 1, 2);
        for (int v = 0; v < variants; ++v) {
          loom::ExecutionProfile p;
          p.implementation = impl.name;
          p.sku = sku_id;
          p.units = uniform_int(rng, 1, 4) * (v + 1);
          p.throughput = uniform(rng, 0.5, 20.0);
          p.setup_seconds = with_setup ? uniform(rng, 0.0, 5.0) : 0.0;
          if (!s.library.profile(impl.name, sku_id, p.units))
            s.library.register_profile(p);
        }
      }
    }

    loom::DagNode node;
    node.id = "t" + std::to_string(i) + "_" + capability;
    node.capability = capability;
    node.work_units = uniform(rng, 5.0, 200.0);
    node.splittable = uniform_int(rng, 0, 1) == 1;
    node.min_chunk = node.splittable ? node.work_units / uniform_int(rng, 2, 8) : 0.0;
    node.multi_path = uniform_int(rng, 0, 3) == 0;
    if (node.multi_path) node.path_quality_ceiling = 5;
    node.consumes = agent.consumes;
    node.produces = agent.produces;
    s.dag.nodes.push_back(node);
  }

  // Edges: from each earlier node whose produced kind the consumer accepts,
  // with random thinning that keeps at least the chain edge.
  for (int i = 1; i < node_count; ++i) {
    for (int p = 0; p < i; ++p) {
      const auto& producer = s.dag.nodes[static_cast<std::size_t>(p)];
      const auto& consumer = s.dag.nodes[static_cast<std::size_t>(i)];
      const bool kind_ok =
          std::find(consumer.consumes.begin(), consumer.consumes.end(),
                    producer.produces) != consumer.consumes.end();
      if (kind_ok && (p == i - 1 || uniform_int(rng, 0, 1) == 1))
        s.dag.edges.push_back({producer.id, consumer.id, producer.produces});
    }
  }

  const int pool_scale = ample_capacity ? 64 : uniform_int(rng, 8, 24);
  s.cluster.add_pool("sim-cpu", 0, pool_scale);
  s.cluster.add_pool("sim-cpu", 1, pool_scale);
  s.cluster.add_pool("sim-gpu", 0, pool_scale);
  s.cluster.add_pool("sim-gpu", 1, pool_scale);
  return s;
}

// Picks a deterministic pseudo-random valid config for the scenario.
inline loom::ConfigPoint random_config(Rng& rng, const RandomScenario& s,
                                       const loom::SearchBounds& bounds) {
  loom::ConfigPoint config;
  for (const auto& node : s.dag.nodes) {
    auto options = loom::node_options(node, s.library, bounds);
    config.nodes[node.id] =
        options[static_cast<std::size_t>(
            uniform_int(rng, 0, static_cast<int>(options.size()) - 1))];
  }
  return config;
}

}  // namespace test_support
