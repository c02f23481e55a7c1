#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "loom/errors.hpp"
#include "loom/workflow.hpp"

namespace loom {

enum class HardwareClass { cpu, gpu };

inline const char* to_string(HardwareClass c) {
  return c == HardwareClass::cpu ? "cpu" : "gpu";
}

inline HardwareClass hardware_class_from_string(const std::string& s) {
  if (s == "cpu") return HardwareClass::cpu;
  if (s == "gpu") return HardwareClass::gpu;
  throw SchemaError("unknown hardware class '" + s + "'");
}

enum class ArgKind { number, integer, string };

inline ArgKind arg_kind_from_string(const std::string& s) {
  if (s == "number") return ArgKind::number;
  if (s == "integer") return ArgKind::integer;
  if (s == "string") return ArgKind::string;
  throw SchemaError("unknown argument kind '" + s + "'");
}

// Capability interface: argument schema plus declared dataflow kinds.
struct AgentSpec {
  struct Arg {
    std::string name;
    ArgKind kind = ArgKind::number;
    bool required = false;
  };

  std::string capability;
  std::vector<Arg> schema;
  std::vector<MediaKind> consumes;
  MediaKind produces = MediaKind::text;
};

// A concrete model or tool realizing one capability.
struct Implementation {
  std::string name;
  std::string capability;
  int quality = 0;  // ordinal rank, never interpolated
  std::set<HardwareClass> supported_classes;
};

struct HardwareSku {
  std::string id;
  HardwareClass hardware_class = HardwareClass::cpu;
  std::string generation;
  std::string capacity_unit;  // "core" or "device"
  double busy_watts_per_unit = 0.0;
  double idle_watts_per_unit = 0.0;
  double dollars_per_unit_hour = 0.0;
};

// Measured behaviour of one implementation on one SKU at one allocation size.
// Throughput is allocation-level: work units per second for the whole group
// of `units`.
struct ExecutionProfile {
  std::string implementation;
  std::string sku;
  int units = 1;
  double throughput = 0.0;
  double setup_seconds = 0.0;
};

struct ProfileObservation {
  std::string implementation;
  std::string sku;
  int units = 1;
  double work_units = 0.0;
  double elapsed_seconds = 0.0;
  double setup_seconds = 0.0;
};

inline void from_json(const nlohmann::json& j, AgentSpec::Arg& a) {
  a.name = j.at("name").get<std::string>();
  a.kind = arg_kind_from_string(j.at("kind").get<std::string>());
  a.required = j.value("required", false);
}

inline void to_json(nlohmann::json& j, const AgentSpec::Arg& a) {
  const char* kind = a.kind == ArgKind::number    ? "number"
                     : a.kind == ArgKind::integer ? "integer"
                                                  : "string";
  j = nlohmann::json{{"name", a.name}, {"kind", kind}, {"required", a.required}};
}

inline void from_json(const nlohmann::json& j, AgentSpec& a) {
  a.capability = j.at("capability").get<std::string>();
  a.schema = j.at("schema").get<std::vector<AgentSpec::Arg>>();
  const auto& consumes = j.at("consumes");
  if (consumes.is_string()) {
    a.consumes.push_back(media_kind_from_string(consumes.get<std::string>()));
  } else {
    for (const auto& k : consumes)
      a.consumes.push_back(media_kind_from_string(k.get<std::string>()));
  }
  a.produces = media_kind_from_string(j.at("produces").get<std::string>());
}

inline void to_json(nlohmann::json& j, const AgentSpec& a) {
  nlohmann::json consumes = nlohmann::json::array();
  for (auto k : a.consumes) consumes.push_back(to_string(k));
  j = nlohmann::json{{"capability", a.capability},
                     {"schema", a.schema},
                     {"consumes", consumes},
                     {"produces", to_string(a.produces)}};
}

inline void from_json(const nlohmann::json& j, Implementation& i) {
  i.name = j.at("name").get<std::string>();
  i.capability = j.at("capability").get<std::string>();
  i.quality = j.at("quality").get<int>();
  for (const auto& c : j.at("supported_classes"))
    i.supported_classes.insert(hardware_class_from_string(c.get<std::string>()));
}

inline void to_json(nlohmann::json& j, const Implementation& i) {
  nlohmann::json classes = nlohmann::json::array();
  for (auto c : i.supported_classes) classes.push_back(to_string(c));
  j = nlohmann::json{{"name", i.name},
                     {"capability", i.capability},
                     {"quality", i.quality},
                     {"supported_classes", classes}};
}

inline void from_json(const nlohmann::json& j, HardwareSku& s) {
  s.id = j.at("id").get<std::string>();
  s.hardware_class = hardware_class_from_string(j.at("class").get<std::string>());
  s.generation = j.value("generation", "");
  s.capacity_unit = j.value("capacity_unit", "unit");
  s.busy_watts_per_unit = j.at("busy_watts_per_unit").get<double>();
  s.idle_watts_per_unit = j.at("idle_watts_per_unit").get<double>();
  s.dollars_per_unit_hour = j.at("dollars_per_unit_hour").get<double>();
}

inline void to_json(nlohmann::json& j, const HardwareSku& s) {
  j = nlohmann::json{{"id", s.id},
                     {"class", to_string(s.hardware_class)},
                     {"generation", s.generation},
                     {"capacity_unit", s.capacity_unit},
                     {"busy_watts_per_unit", s.busy_watts_per_unit},
                     {"idle_watts_per_unit", s.idle_watts_per_unit},
                     {"dollars_per_unit_hour", s.dollars_per_unit_hour}};
}

inline void from_json(const nlohmann::json& j, ExecutionProfile& p) {
  p.implementation = j.at("implementation").get<std::string>();
  p.sku = j.at("sku").get<std::string>();
  p.units = j.at("units").get<int>();
  p.throughput = j.at("throughput").get<double>();
  p.setup_seconds = j.value("setup_seconds", 0.0);
}

inline void to_json(nlohmann::json& j, const ExecutionProfile& p) {
  j = nlohmann::json{{"implementation", p.implementation},
                     {"sku", p.sku},
                     {"units", p.units},
                     {"throughput", p.throughput},
                     {"setup_seconds", p.setup_seconds}};
}

// Registry of agents, implementations, hardware SKUs and execution profiles.
// Registration is single-writer; freeze() makes the library immutable and safe
// for concurrent readers.
class AgentLibrary {
 public:
  void register_agent(AgentSpec agent) {
    check_mutable();
    if (agents_.count(agent.capability))
      throw DuplicateKeyError("agent '" + agent.capability +
                              "' is already registered");
    agents_.emplace(agent.capability, std::move(agent));
  }

  void register_sku(HardwareSku sku) {
    check_mutable();
    if (sku.busy_watts_per_unit < 0 || sku.idle_watts_per_unit < 0 ||
        sku.dollars_per_unit_hour < 0)
      throw ValidationError("sku '" + sku.id + "': power and rate must be >= 0");
    if (sku.busy_watts_per_unit < sku.idle_watts_per_unit)
      throw ValidationError("sku '" + sku.id +
                            "': busy power must be >= idle power");
    if (skus_.count(sku.id))
      throw DuplicateKeyError("sku '" + sku.id + "' is already registered");
    skus_.emplace(sku.id, std::move(sku));
  }

  void register_implementation(Implementation impl) {
    check_mutable();
    if (impl.supported_classes.empty())
      throw ValidationError("implementation '" + impl.name +
                            "': must support at least one hardware class");
    if (impl.quality < 0)
      throw ValidationError("implementation '" + impl.name +
                            "': quality must be >= 0");
    if (!agents_.count(impl.capability))
      throw DanglingReferenceError("implementation '" + impl.name +
                                   "' references unknown capability '" +
                                   impl.capability + "'");
    if (implementations_.count(impl.name))
      throw DuplicateKeyError("implementation '" + impl.name +
                              "' is already registered");
    implementations_.emplace(impl.name, std::move(impl));
  }

  void register_profile(ExecutionProfile profile) {
    check_mutable();
    if (profile.throughput <= 0)
      throw ValidationError("profile (" + profile.implementation + ", " +
                            profile.sku + "): throughput must be > 0");
    if (profile.setup_seconds < 0)
      throw ValidationError("profile (" + profile.implementation + ", " +
                            profile.sku + "): setup latency must be >= 0");
    if (profile.units < 1)
      throw ValidationError("profile (" + profile.implementation + ", " +
                            profile.sku + "): units must be >= 1");
    if (!implementations_.count(profile.implementation))
      throw DanglingReferenceError("profile references unknown implementation '" +
                                   profile.implementation + "'");
    if (!skus_.count(profile.sku))
      throw DanglingReferenceError("profile references unknown sku '" +
                                   profile.sku + "'");
    auto key = std::make_tuple(profile.implementation, profile.sku, profile.units);
    if (profiles_.count(key))
      throw DuplicateKeyError("profile (" + profile.implementation + ", " +
                              profile.sku + ", " + std::to_string(profile.units) +
                              ") is already registered");
    profiles_.emplace(std::move(key), std::move(profile));
  }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  const AgentSpec* agent(const std::string& capability) const {
    auto it = agents_.find(capability);
    return it == agents_.end() ? nullptr : &it->second;
  }

  const HardwareSku* sku(const std::string& id) const {
    auto it = skus_.find(id);
    return it == skus_.end() ? nullptr : &it->second;
  }

  const Implementation* implementation(const std::string& name) const {
    auto it = implementations_.find(name);
    return it == implementations_.end() ? nullptr : &it->second;
  }

  const ExecutionProfile* profile(const std::string& implementation,
                                  const std::string& sku, int units) const {
    auto it = profiles_.find(std::make_tuple(implementation, sku, units));
    return it == profiles_.end() ? nullptr : &it->second;
  }

  // All implementations of `capability` with quality >= floor, best first.
  std::vector<const Implementation*> implementations_for(
      const std::string& capability, int quality_floor = 0) const {
    if (!agents_.count(capability))
      throw UnknownCapabilityError("capability '" + capability +
                                   "' is not registered");
    std::vector<const Implementation*> result;
    for (const auto& [name, impl] : implementations_) {
      if (impl.capability == capability && impl.quality >= quality_floor)
        result.push_back(&impl);
    }
    std::sort(result.begin(), result.end(),
              [](const Implementation* a, const Implementation* b) {
                if (a->quality != b->quality) return a->quality > b->quality;
                return a->name < b->name;
              });
    return result;
  }

  std::vector<const ExecutionProfile*> profiles_for(
      const std::string& implementation) const {
    std::vector<const ExecutionProfile*> result;
    for (const auto& [key, p] : profiles_)
      if (p.implementation == implementation) result.push_back(&p);
    return result;  // map order: (implementation, sku, units)
  }

  std::vector<const HardwareSku*> skus() const {
    std::vector<const HardwareSku*> result;
    for (const auto& [id, s] : skus_) result.push_back(&s);
    return result;
  }

  // Derives a profile from an observed run. Inverse property: predicting the
  // same work on the resulting profile reproduces the observed elapsed time.
  static ExecutionProfile calibrate_profile(const ProfileObservation& observed) {
    if (observed.work_units <= 0)
      throw DegenerateObservationError("observed work_units must be > 0");
    if (observed.elapsed_seconds <= observed.setup_seconds)
      throw DegenerateObservationError(
          "observed elapsed time must exceed setup time");
    ExecutionProfile p;
    p.implementation = observed.implementation;
    p.sku = observed.sku;
    p.units = observed.units;
    p.setup_seconds = observed.setup_seconds;
    p.throughput =
        observed.work_units / (observed.elapsed_seconds - observed.setup_seconds);
    return p;
  }

  static double predict_elapsed(const ExecutionProfile& profile, double work) {
    return profile.setup_seconds + work / profile.throughput;
  }

  // Library bundle: {"skus": [...], "agents": [...], "implementations": [...],
  // "profiles": [...]}.
  static AgentLibrary from_json(const nlohmann::json& j) {
    AgentLibrary lib;
    try {
      for (const auto& s : j.value("skus", nlohmann::json::array()))
        lib.register_sku(s.get<HardwareSku>());
      for (const auto& a : j.value("agents", nlohmann::json::array()))
        lib.register_agent(a.get<AgentSpec>());
      for (const auto& i : j.value("implementations", nlohmann::json::array()))
        lib.register_implementation(i.get<Implementation>());
      for (const auto& p : j.value("profiles", nlohmann::json::array()))
        lib.register_profile(p.get<ExecutionProfile>());
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("malformed library bundle: ") + e.what());
    }
    return lib;
  }

  static AgentLibrary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open library bundle '" + path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("library bundle '" + path + "': " + e.what());
    }
    return from_json(j);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["skus"] = nlohmann::json::array();
    for (const auto& [id, s] : skus_) j["skus"].push_back(s);
    j["agents"] = nlohmann::json::array();
    for (const auto& [cap, a] : agents_) j["agents"].push_back(a);
    j["implementations"] = nlohmann::json::array();
    for (const auto& [name, i] : implementations_) j["implementations"].push_back(i);
    j["profiles"] = nlohmann::json::array();
    for (const auto& [key, p] : profiles_) j["profiles"].push_back(p);
    return j;
  }

 private:
  void check_mutable() const {
    if (frozen_)
      throw ValidationError("library is frozen; registration is closed");
  }

  std::map<std::string, AgentSpec> agents_;
  std::map<std::string, HardwareSku> skus_;
  std::map<std::string, Implementation> implementations_;
  std::map<std::tuple<std::string, std::string, int>, ExecutionProfile> profiles_;
  bool frozen_ = false;
};

}  // namespace loom
