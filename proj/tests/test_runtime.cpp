#include <catch2/catch_amalgamated.hpp>

#include "loom/optimizer.hpp"
#include "loom/runtime.hpp"
#include "support.hpp"

using namespace loom;

namespace {

// One capability, one implementation, profile with setup, splittable node.
struct MiniWorld {
  AgentLibrary library;
  WorkflowDag dag;
  ClusterState cluster;
  ConfigPoint config;
};

MiniWorld mini_world(double work, double setup_seconds, int workers,
                     int pool_units = 8) {
  MiniWorld w;
  HardwareSku gpu;
  gpu.id = "g";
  gpu.hardware_class = HardwareClass::gpu;
  gpu.busy_watts_per_unit = 400;
  gpu.idle_watts_per_unit = 50;
  gpu.dollars_per_unit_hour = 3.0;
  w.library.register_sku(gpu);
  AgentSpec agent;
  agent.capability = "work";
  agent.consumes = {MediaKind::video};
  agent.produces = MediaKind::text;
  w.library.register_agent(agent);
  Implementation impl;
  impl.name = "engine";
  impl.capability = "work";
  impl.quality = 1;
  impl.supported_classes = {HardwareClass::gpu};
  w.library.register_implementation(impl);
  w.library.register_profile({"engine", "g", 1, 1.0, setup_seconds});

  DagNode node{.id = "n", .capability = "work", .work_units = work,
               .splittable = true, .min_chunk = 1.0,
               .consumes = {MediaKind::video}, .produces = MediaKind::text};
  w.dag.nodes = {node};
  w.cluster.add_pool("g", 0, pool_units);
  w.config.nodes["n"] = NodeAssignment{"engine", {{"g", 1, workers}}, 1};
  return w;
}

}  // namespace

TEST_CASE("split_task balances chunks") {
  SECTION("even split") {
    const auto chunks = split_task(100.0, 4, 1.0);
    REQUIRE(chunks.size() == 4);
    for (double c : chunks) CHECK(c == 25.0);
  }
  SECTION("chunk floor limits the count") {
    const auto chunks = split_task(10.0, 100, 5.0);
    REQUIRE(chunks.size() == 2);
    for (double c : chunks) CHECK(c == 5.0);
  }
  SECTION("work below one chunk stays whole") {
    const auto chunks = split_task(3.0, 4, 5.0);
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0] == 3.0);
  }
  SECTION("random splits conserve work") {
    test_support::Rng rng(5150);
    for (int trial = 0; trial < 300; ++trial) {
      const double work = test_support::uniform(rng, 0.1, 1e4);
      const int fan = test_support::uniform_int(rng, 1, 16);
      const double min_chunk = test_support::uniform(rng, 0.05, work);
      const auto chunks = split_task(work, fan, min_chunk);
      double total = 0;
      for (double c : chunks) total += c;
      CHECK(total == Catch::Approx(work).epsilon(1e-9));
      CHECK(static_cast<int>(chunks.size()) <= fan);
    }
  }
}

TEST_CASE("water_fill_split conserves work and favors faster workers") {
  test_support::Rng rng(6160);
  for (int trial = 0; trial < 200; ++trial) {
    const double work = test_support::uniform(rng, 1.0, 1e3);
    const double min_chunk = work / test_support::uniform_int(rng, 2, 20);
    std::vector<double> speeds;
    const int n = test_support::uniform_int(rng, 2, 4);
    for (int i = 0; i < n; ++i)
      speeds.push_back(test_support::uniform(rng, 0.5, 20.0));
    const auto split = water_fill_split(work, min_chunk, speeds);
    double total = 0;
    for (double s : split) total += s;
    CHECK(total == Catch::Approx(work).epsilon(1e-9));
  }
  // The fixture's hybrid point: a 15-units/s worker against a 10/3-units/s
  // worker over eight 75-unit quanta lands 7 quanta on the fast side.
  const auto split = water_fill_split(600.0, 75.0, {15.0, 10.0 / 3.0});
  CHECK(split[0] == Catch::Approx(525.0));
  CHECK(split[1] == Catch::Approx(75.0));
}

TEST_CASE("empty dag simulates to zero") {
  MiniWorld w = mini_world(10, 0, 1);
  WorkflowDag empty;
  ConfigPoint config;
  Simulator sim;
  const auto result = sim.execute(empty, config, w.cluster, w.library);
  CHECK(result.metrics.makespan_us == 0);
  CHECK(result.metrics.total_wh == 0.0);
  CHECK(result.trace.entries.empty());
}

TEST_CASE("compute_metrics converts busy time to watt-hours") {
  MiniWorld w = mini_world(3600, 0, 1);
  Simulator sim;
  const auto result = sim.execute(w.dag, w.config, w.cluster, w.library);
  // One unit at 400 W for 3600 s is 400 Wh, all of it GPU energy.
  CHECK(result.metrics.makespan_us == 3'600'000'000LL);
  CHECK(result.metrics.gpu_wh == Catch::Approx(400.0));
  CHECK(result.metrics.cpu_wh == 0.0);
  CHECK(result.metrics.dollars == Catch::Approx(3.0));
  // Wall-clock energy covers the idle pool units too.
  CHECK(result.metrics.wall_clock_wh >= result.metrics.gpu_wh);
}

TEST_CASE("metrics totals match an independent fold over the trace") {
  test_support::Rng rng(8311);
  for (int trial = 0; trial < 25; ++trial) {
    auto scenario = test_support::make_random_scenario(rng, 4, true, true);
    SearchBounds bounds = test_support::fixture_bounds(scenario.cluster,
                                                       scenario.library);
    const auto config = test_support::random_config(rng, scenario, bounds);
    Simulator sim;
    const auto result =
        sim.execute(scenario.dag, config, scenario.cluster, scenario.library);

    double gpu = 0, cpu = 0, dollars = 0;
    Micros makespan = 0;
    for (const auto& e : result.trace.entries) {
      const auto* sku = scenario.library.sku(e.sku);
      (sku->hardware_class == HardwareClass::gpu ? gpu : cpu) += e.energy_wh;
      dollars += e.dollars;
      makespan = std::max(makespan, e.end_us);
    }
    CHECK(result.metrics.gpu_wh == Catch::Approx(gpu).margin(1e-12));
    CHECK(result.metrics.cpu_wh == Catch::Approx(cpu).margin(1e-12));
    CHECK(result.metrics.dollars == Catch::Approx(dollars).margin(1e-12));
    CHECK(result.metrics.makespan_us == makespan);
    CHECK(result.metrics.total_wh ==
          Catch::Approx(result.metrics.gpu_wh + result.metrics.cpu_wh));
    CHECK(result.metrics.gpu_wh + result.metrics.cpu_wh <=
          result.metrics.wall_clock_wh + 1e-9);
  }
}

TEST_CASE("warm units are preferred and skip setup") {
  // Two sequential nodes share one implementation; the second run reuses the
  // warm units and saves the 10 s setup.
  MiniWorld w = mini_world(10, 10.0, 1);
  DagNode second{.id = "n2", .capability = "work", .work_units = 10.0,
                 .splittable = true, .min_chunk = 1.0,
                 .consumes = {MediaKind::text}, .produces = MediaKind::text};
  w.dag.nodes.push_back(second);
  w.dag.edges.push_back({"n", "n2", MediaKind::text});
  w.config.nodes["n2"] = w.config.nodes["n"];

  Simulator sim;
  const auto result = sim.execute(w.dag, w.config, w.cluster, w.library);
  // First node: 10 s setup + 10 s run; second starts warm at t=20 and runs
  // 10 s.
  CHECK(result.metrics.makespan_us == 30'000'000);

  // The cold estimate charges setup to both nodes.
  const auto e = estimate(w.config, w.dag, w.library);
  CHECK(e.latency_us == 40'000'000);
}

TEST_CASE("placement prefers the pool with the largest remaining free block") {
  // Two pools of different size, no warmth anywhere: the 10-unit pool keeps
  // the bigger free block after placing 4 units.
  MiniWorld w = mini_world(10, 0, 1, 6);
  w.cluster.add_pool("g", 1, 10);
  w.library.register_profile({"engine", "g", 4, 1.0, 0.0});
  w.config.nodes["n"] = NodeAssignment{"engine", {{"g", 4, 1}}, 1};
  Simulator sim;
  const auto result = sim.execute(w.dag, w.config, w.cluster, w.library);
  REQUIRE(result.trace.entries.size() == 1);
  CHECK(result.trace.entries[0].pool_node == 1);
}

TEST_CASE("tasks queue when the cluster is full and start at the release") {
  // Pool of 1 unit; two independent nodes each need the unit for 10 s.
  MiniWorld w = mini_world(10, 0, 1, 1);
  DagNode other{.id = "m", .capability = "work", .work_units = 10.0,
                .splittable = true, .min_chunk = 1.0,
                .consumes = {MediaKind::video}, .produces = MediaKind::text};
  w.dag.nodes.push_back(other);
  w.config.nodes["m"] = w.config.nodes["n"];

  Simulator sim;
  const auto result = sim.execute(w.dag, w.config, w.cluster, w.library);
  CHECK(result.metrics.makespan_us == 20'000'000);
  REQUIRE(result.trace.entries.size() == 2);
  CHECK(result.trace.entries[0].end_us == result.trace.entries[1].start_us);
}

TEST_CASE("oversized demands deadlock with the offending node named") {
  MiniWorld w = mini_world(10, 0, 1, 1);
  w.config.nodes["n"] = NodeAssignment{"engine", {{"g", 4, 1}}, 1};
  w.library.register_profile({"engine", "g", 4, 1.0, 0.0});
  Simulator sim;
  try {
    sim.execute(w.dag, w.config, w.cluster, w.library);
    FAIL("expected DeadlockError");
  } catch (const DeadlockError& e) {
    CHECK(std::string(e.what()).find("'n'") != std::string::npos);
  }
}

TEST_CASE("spot revocation requeues the preempted chunk and work completes") {
  // Two units, two parallel workers of 10 s each; at t=5 one unit is revoked,
  // its chunk restarts from the chunk boundary once capacity frees up.
  MiniWorld w = mini_world(20, 0, 2, 2);
  AvailabilityEvent revoke;
  revoke.time_us = 5'000'000;
  revoke.sku = "g";
  revoke.delta_units = -1;
  revoke.kind = AvailabilityEvent::Kind::spot_revoke;
  nlohmann::json cluster_json = {
      {"nodes", {{{"skus", {{{"sku_id", "g"}, {"units", 2}}}}}}},
      {"availability_events",
       {{{"time", 5.0}, {"sku", "g"}, {"delta_units", -1}, {"kind", "spot_revoke"}}}}};
  ClusterState cluster = ClusterState::from_json(cluster_json, w.library);

  Simulator sim;
  const auto result = sim.execute(w.dag, w.config, cluster, w.library);

  // The surviving worker finishes at 10 s; the preempted 10-unit chunk then
  // reruns on the freed unit, completing at 20 s.
  CHECK(result.metrics.makespan_us == 20'000'000);

  // Work conservation counts each chunk exactly once at completion.
  double completed = 0;
  bool preempted_span_recorded = false;
  for (const auto& e : result.trace.entries) {
    if (e.completed) completed += e.work_units;
    if (!e.completed) preempted_span_recorded = true;
  }
  CHECK(completed == Catch::Approx(20.0));
  CHECK(preempted_span_recorded);
  CHECK(result.cluster.active_allocation_units() == 0);
}

TEST_CASE("execution paths clone work and merge at a free join") {
  MiniWorld w = mini_world(10, 0, 1, 8);
  w.dag.nodes[0].multi_path = true;
  w.dag.nodes[0].path_quality_ceiling = 3;
  w.config.nodes["n"].path_count = 2;

  Simulator sim;
  const auto result = sim.execute(w.dag, w.config, w.cluster, w.library);
  // Both clones run in parallel: same makespan, doubled energy and work.
  CHECK(result.metrics.makespan_us == 10'000'000);
  double executed = 0;
  for (const auto& e : result.trace.entries)
    if (e.completed) executed += e.work_units;
  CHECK(executed == Catch::Approx(20.0));
  const auto e = estimate(w.config, w.dag, w.library);
  CHECK(e.latency_us == 10'000'000);
  CHECK(result.metrics.gpu_wh == Catch::Approx(e.gpu_wh));
}

TEST_CASE("traces replay byte-identically") {
  const auto f = test_support::load_video_fixture();
  const auto config = test_support::load_pin("pin_stt_gpu_cpu.json");
  Simulator sim;
  const auto a = sim.execute(f.dag, config, f.cluster, f.library);
  const auto b = sim.execute(f.dag, config, f.cluster, f.library);
  CHECK(serialize_trace(a.trace, a.metrics, 0) ==
        serialize_trace(b.trace, b.metrics, 0));
}

TEST_CASE("trace files parse back to the same entries") {
  const auto f = test_support::load_video_fixture();
  const auto config = test_support::load_pin("pin_stt_cpu.json");
  Simulator sim;
  const auto result = sim.execute(f.dag, config, f.cluster, f.library);
  const std::string text = serialize_trace(result.trace, result.metrics, 7);
  const auto parsed = parse_trace(text);
  REQUIRE(parsed.entries.size() == result.trace.entries.size());
  for (std::size_t i = 0; i < parsed.entries.size(); ++i) {
    CHECK(parsed.entries[i].node_id == result.trace.entries[i].node_id);
    CHECK(parsed.entries[i].start_us == result.trace.entries[i].start_us);
    CHECK(parsed.entries[i].end_us == result.trace.entries[i].end_us);
    CHECK(parsed.entries[i].units == result.trace.entries[i].units);
  }
  CHECK(parsed.metrics.at("seed").get<int>() == 7);
  CHECK(parsed.metrics.at("makespan_s").get<double>() ==
        Catch::Approx(result.metrics.makespan_seconds()));
}

TEST_CASE("simulated makespan never beats the estimate") {
  test_support::Rng rng(515151);
  for (int trial = 0; trial < 40; ++trial) {
    // Tight clusters may queue tasks; the estimate stays a lower bound.
    auto scenario = test_support::make_random_scenario(rng, 4, true, false);
    SearchBounds bounds = test_support::fixture_bounds(scenario.cluster,
                                                       scenario.library);
    const auto config = test_support::random_config(rng, scenario, bounds);
    const auto e = estimate(config, scenario.dag, scenario.library);
    Simulator sim;
    try {
      const auto result =
          sim.execute(scenario.dag, config, scenario.cluster, scenario.library);
      CHECK(result.metrics.makespan_us >= e.latency_us);
    } catch (const DeadlockError&) {
      // A config whose workers exceed every pool is legitimately unrunnable.
    }
  }
}

TEST_CASE("task starts respect topological order") {
  const auto f = test_support::load_video_fixture();
  const auto config = test_support::load_pin("pin_stt_gpu.json");
  Simulator sim;
  const auto result = sim.execute(f.dag, config, f.cluster, f.library);

  std::map<std::string, Micros> first_start, last_end;
  for (const auto& e : result.trace.entries) {
    if (!first_start.count(e.node_id)) first_start[e.node_id] = e.start_us;
    first_start[e.node_id] = std::min(first_start[e.node_id], e.start_us);
    last_end[e.node_id] = std::max(last_end[e.node_id], e.end_us);
  }
  for (const auto& edge : f.dag.edges)
    CHECK(first_start.at(edge.to) >= last_end.at(edge.from));
}
