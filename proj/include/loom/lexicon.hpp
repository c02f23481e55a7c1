#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "loom/errors.hpp"
#include "loom/workflow.hpp"

namespace loom {

using DefaultValue = std::variant<double, std::string>;

// One capability the planner can map task text onto. Template entries (those
// with a non-empty expansion) match whole-job descriptions and expand into a
// list of concrete capabilities.
struct LexiconEntry {
  std::vector<std::string> keywords;
  std::string capability;
  std::vector<MediaKind> consumes;
  MediaKind produces = MediaKind::text;
  std::map<std::string, DefaultValue> defaults;
  bool splittable = false;
  double min_chunk = 0.0;
  double work_factor = 1.0;  // produced work = node work * factor
  bool multi_path = false;
  std::optional<int> path_quality_ceiling;
  std::vector<std::string> expansion;

  bool is_template() const { return !expansion.empty(); }
};

inline void from_json(const nlohmann::json& j, LexiconEntry& e) {
  e.keywords = j.at("keywords").get<std::vector<std::string>>();
  e.capability = j.at("capability").get<std::string>();
  if (j.contains("expansion")) {
    e.expansion = j.at("expansion").get<std::vector<std::string>>();
    return;  // template entries carry no dataflow declaration
  }
  const auto& consumes = j.at("consumes");
  if (consumes.is_string()) {
    e.consumes.push_back(media_kind_from_string(consumes.get<std::string>()));
  } else {
    for (const auto& k : consumes)
      e.consumes.push_back(media_kind_from_string(k.get<std::string>()));
  }
  e.produces = media_kind_from_string(j.at("produces").get<std::string>());
  if (j.contains("defaults")) {
    for (const auto& [name, value] : j.at("defaults").items()) {
      if (value.is_string()) {
        e.defaults[name] = value.get<std::string>();
      } else if (value.is_number()) {
        e.defaults[name] = value.get<double>();
      } else {
        throw SchemaError("lexicon default '" + name +
                          "' must be a number or string");
      }
    }
  }
  e.splittable = j.value("splittable", false);
  e.min_chunk = j.value("min_chunk", 0.0);
  e.work_factor = j.value("work_factor", 1.0);
  e.multi_path = j.value("multi_path", false);
  if (j.contains("path_quality_ceiling"))
    e.path_quality_ceiling = j.at("path_quality_ceiling").get<int>();
}

inline void to_json(nlohmann::json& j, const LexiconEntry& e) {
  j = nlohmann::json{{"keywords", e.keywords}, {"capability", e.capability}};
  if (e.is_template()) {
    j["expansion"] = e.expansion;
    return;
  }
  nlohmann::json consumes = nlohmann::json::array();
  for (auto k : e.consumes) consumes.push_back(to_string(k));
  j["consumes"] = consumes;
  j["produces"] = to_string(e.produces);
  nlohmann::json defaults = nlohmann::json::object();
  for (const auto& [name, value] : e.defaults) {
    if (std::holds_alternative<double>(value)) {
      defaults[name] = std::get<double>(value);
    } else {
      defaults[name] = std::get<std::string>(value);
    }
  }
  j["defaults"] = defaults;
  j["splittable"] = e.splittable;
  j["min_chunk"] = e.min_chunk;
  j["work_factor"] = e.work_factor;
  j["multi_path"] = e.multi_path;
  if (e.path_quality_ceiling) j["path_quality_ceiling"] = *e.path_quality_ceiling;
}

class CapabilityLexicon {
 public:
  CapabilityLexicon() = default;
  explicit CapabilityLexicon(std::vector<LexiconEntry> entries)
      : entries_(std::move(entries)) {
    validate();
  }

  static CapabilityLexicon from_json(const nlohmann::json& j) {
    try {
      return CapabilityLexicon(j.get<std::vector<LexiconEntry>>());
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("malformed lexicon: ") + e.what());
    }
  }

  static CapabilityLexicon load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open lexicon file '" + path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("lexicon file '" + path + "': " + e.what());
    }
    return from_json(j);
  }

  const std::vector<LexiconEntry>& entries() const { return entries_; }

  const LexiconEntry* find(const std::string& capability) const {
    for (const auto& e : entries_)
      if (!e.is_template() && e.capability == capability) return &e;
    return nullptr;
  }

  const LexiconEntry& at(const std::string& capability) const {
    const LexiconEntry* e = find(capability);
    if (!e) throw UnknownCapabilityError("capability '" + capability +
                                         "' is not in the lexicon");
    return *e;
  }

  std::vector<const LexiconEntry*> concrete_entries() const {
    std::vector<const LexiconEntry*> out;
    for (const auto& e : entries_)
      if (!e.is_template()) out.push_back(&e);
    return out;
  }

  std::vector<const LexiconEntry*> template_entries() const {
    std::vector<const LexiconEntry*> out;
    for (const auto& e : entries_)
      if (e.is_template()) out.push_back(&e);
    return out;
  }

 private:
  void validate() const {
    std::set<std::string> seen;
    for (const auto& e : entries_) {
      if (e.keywords.empty())
        throw ValidationError("lexicon entry '" + e.capability +
                              "': keyword set must be non-empty");
      if (!seen.insert(e.capability).second)
        throw ValidationError("lexicon entry '" + e.capability +
                              "': duplicate capability tag");
      if (!e.is_template()) {
        if (e.consumes.empty())
          throw ValidationError("lexicon entry '" + e.capability +
                                "': consumes must be non-empty");
        if (e.splittable && e.min_chunk <= 0)
          throw ValidationError("lexicon entry '" + e.capability +
                                "': splittable requires min_chunk > 0");
      }
    }
    for (const auto& e : entries_) {
      for (const auto& cap : e.expansion) {
        bool found = false;
        for (const auto& other : entries_)
          if (!other.is_template() && other.capability == cap) found = true;
        if (!found)
          throw ValidationError("template '" + e.capability +
                                "' expands to unknown capability '" + cap + "'");
      }
    }
  }

  std::vector<LexiconEntry> entries_;
};

}  // namespace loom
