#include <catch2/catch_amalgamated.hpp>

#include "loom/agent_library.hpp"
#include "support.hpp"

using namespace loom;

namespace {

AgentLibrary small_library() {
  AgentLibrary lib;
  HardwareSku a100;
  a100.id = "a100";
  a100.hardware_class = HardwareClass::gpu;
  a100.busy_watts_per_unit = 400;
  a100.idle_watts_per_unit = 60;
  a100.dollars_per_unit_hour = 3.0;
  lib.register_sku(a100);

  AgentSpec stt;
  stt.capability = "speech_to_text";
  stt.consumes = {MediaKind::video};
  stt.produces = MediaKind::text;
  lib.register_agent(stt);

  Implementation whisper;
  whisper.name = "whisper";
  whisper.capability = "speech_to_text";
  whisper.quality = 2;
  whisper.supported_classes = {HardwareClass::gpu};
  lib.register_implementation(whisper);
  return lib;
}

}  // namespace

TEST_CASE("register accepts a profile once its references exist") {
  AgentLibrary lib = small_library();
  ExecutionProfile p{"whisper", "a100", 1, 4.8, 0.0};
  lib.register_profile(p);
  REQUIRE(lib.profile("whisper", "a100", 1) != nullptr);
  CHECK(lib.profile("whisper", "a100", 1)->throughput == 4.8);
}

TEST_CASE("register rejects dangling references") {
  AgentLibrary lib = small_library();
  CHECK_THROWS_AS(lib.register_profile({"whisper", "h100", 1, 4.8, 0.0}),
                  DanglingReferenceError);
  CHECK_THROWS_AS(lib.register_profile({"deepspeech", "a100", 1, 4.8, 0.0}),
                  DanglingReferenceError);
  Implementation orphan;
  orphan.name = "orphan";
  orphan.capability = "unknown_capability";
  orphan.quality = 1;
  orphan.supported_classes = {HardwareClass::gpu};
  CHECK_THROWS_AS(lib.register_implementation(orphan), DanglingReferenceError);
}

TEST_CASE("register rejects duplicate keys") {
  AgentLibrary lib = small_library();
  lib.register_profile({"whisper", "a100", 1, 4.8, 0.0});
  CHECK_THROWS_AS(lib.register_profile({"whisper", "a100", 1, 9.9, 0.0}),
                  DuplicateKeyError);
  // A different allocation size is a different profile.
  CHECK_NOTHROW(lib.register_profile({"whisper", "a100", 2, 9.9, 0.0}));
}

TEST_CASE("frozen libraries refuse registration") {
  AgentLibrary lib = small_library();
  lib.freeze();
  CHECK_THROWS_AS(lib.register_profile({"whisper", "a100", 1, 4.8, 0.0}),
                  ValidationError);
}

TEST_CASE("sku invariants are enforced") {
  AgentLibrary lib;
  HardwareSku bad;
  bad.id = "bad";
  bad.hardware_class = HardwareClass::cpu;
  bad.busy_watts_per_unit = 10;
  bad.idle_watts_per_unit = 20;  // idle above busy
  CHECK_THROWS_AS(lib.register_sku(bad), ValidationError);
}

TEST_CASE("implementations_for filters by quality floor") {
  AgentLibrary lib = small_library();
  Implementation deepspeech;
  deepspeech.name = "deepspeech";
  deepspeech.capability = "speech_to_text";
  deepspeech.quality = 1;
  deepspeech.supported_classes = {HardwareClass::gpu};
  lib.register_implementation(deepspeech);
  Implementation conformer;
  conformer.name = "fast-conformer";
  conformer.capability = "speech_to_text";
  conformer.quality = 2;
  conformer.supported_classes = {HardwareClass::gpu};
  lib.register_implementation(conformer);

  SECTION("floor zero returns everything, best quality first") {
    const auto all = lib.implementations_for("speech_to_text", 0);
    REQUIRE(all.size() == 3);
    CHECK(all[0]->name == "fast-conformer");  // quality tie -> name order
    CHECK(all[1]->name == "whisper");
    CHECK(all[2]->name == "deepspeech");
  }
  SECTION("floor above every implementation returns nothing") {
    CHECK(lib.implementations_for("speech_to_text", 99).empty());
  }
  SECTION("floor equal to the top score excludes lower-quality entries") {
    const auto top = lib.implementations_for("speech_to_text", 2);
    // Linear-scan oracle.
    std::size_t expected = 0;
    for (const auto* impl : lib.implementations_for("speech_to_text", 0))
      if (impl->quality >= 2) ++expected;
    CHECK(top.size() == expected);
    for (const auto* impl : top) CHECK(impl->quality >= 2);
  }
  SECTION("results shrink monotonically as the floor rises") {
    std::size_t previous = lib.implementations_for("speech_to_text", 0).size();
    for (int floor = 1; floor <= 4; ++floor) {
      const auto now = lib.implementations_for("speech_to_text", floor).size();
      CHECK(now <= previous);
      previous = now;
    }
  }
  SECTION("unknown capability throws") {
    CHECK_THROWS_AS(lib.implementations_for("telepathy", 0),
                    UnknownCapabilityError);
  }
}

TEST_CASE("calibrate_profile inverts observed runs") {
  SECTION("no setup") {
    const auto p = AgentLibrary::calibrate_profile(
        {"whisper", "a100", 1, 100.0, 50.0, 0.0});
    CHECK(p.throughput == 2.0);
  }
  SECTION("setup excluded from the throughput window") {
    const auto p = AgentLibrary::calibrate_profile(
        {"whisper", "a100", 1, 100.0, 60.0, 10.0});
    CHECK(p.throughput == 2.0);
    CHECK(p.setup_seconds == 10.0);
  }
  SECTION("degenerate observation") {
    CHECK_THROWS_AS(
        AgentLibrary::calibrate_profile({"whisper", "a100", 1, 100.0, 5.0, 10.0}),
        DegenerateObservationError);
    CHECK_THROWS_AS(
        AgentLibrary::calibrate_profile({"whisper", "a100", 1, 0.0, 5.0, 0.0}),
        DegenerateObservationError);
  }
}

TEST_CASE("calibration round-trips on random observations") {
  test_support::Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    ProfileObservation obs;
    obs.implementation = "whisper";
    obs.sku = "a100";
    obs.units = test_support::uniform_int(rng, 1, 64);
    obs.work_units = test_support::uniform(rng, 0.1, 1e4);
    obs.setup_seconds = test_support::uniform(rng, 0.0, 60.0);
    obs.elapsed_seconds =
        obs.setup_seconds + test_support::uniform(rng, 1e-3, 1e4);
    const auto profile = AgentLibrary::calibrate_profile(obs);
    const double predicted =
        AgentLibrary::predict_elapsed(profile, obs.work_units);
    CHECK(std::abs(predicted - obs.elapsed_seconds) <=
          1e-9 * std::abs(obs.elapsed_seconds));
  }
}

TEST_CASE("the bundled catalog is calibrated to the baseline trace") {
  // The baseline's transcription profile derives from a 600-unit run
  // finishing in 125 s, the sequential-scene operating point.
  const auto lib = AgentLibrary::load(test_support::fixture("profiles.json"));
  const auto calibrated = AgentLibrary::calibrate_profile(
      {"whisper", "gpu-a100", 1, 600.0, 125.0, 0.0});
  REQUIRE(lib.profile("whisper", "gpu-a100", 1) != nullptr);
  CHECK(lib.profile("whisper", "gpu-a100", 1)->throughput ==
        Catch::Approx(calibrated.throughput));
  // GPU to CPU busy-power ratio is 16:1.
  CHECK(lib.sku("gpu-a100")->busy_watts_per_unit /
            lib.sku("cpu-epyc")->busy_watts_per_unit ==
        16.0);
}

TEST_CASE("library bundles round-trip through json") {
  const auto lib = AgentLibrary::load(test_support::fixture("profiles.json"));
  const auto reloaded = AgentLibrary::from_json(lib.to_json());
  CHECK(reloaded.to_json() == lib.to_json());
}
