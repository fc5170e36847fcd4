#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "toml.hpp"

#include "phs/error.hpp"
#include "phs/experiment.hpp"

namespace phs {

namespace detail {

inline json toml_to_json(const toml::node& node, const std::string& path) {
  if (const auto* t = node.as_table()) {
    json j = json::object();
    for (const auto& [key, value] : *t) j[std::string(key.str())] = toml_to_json(value, join_path(path, key.str()));
    return j;
  }
  if (const auto* a = node.as_array()) {
    json j = json::array();
    for (std::size_t i = 0; i < a->size(); ++i)
      j.push_back(toml_to_json(*a->get(i), path + "[" + std::to_string(i) + "]"));
    return j;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  throw ValidationError("config: '" + path + "': dates and times are not supported");
}

}  // namespace detail

/// Parses TOML text into the shared JSON form. Syntax errors carry line:column.
inline json toml_config_to_json(std::string_view text, const std::string& source = "config") {
  try {
    const toml::table table = toml::parse(text, source);
    return detail::toml_to_json(table, "");
  } catch (const toml::parse_error& e) {
    const auto& where = e.source().begin;
    throw ValidationError(source + ":" + std::to_string(where.line) + ":" + std::to_string(where.column) + ": " +
                          std::string(e.description()));
  }
}

/// Reads a TOML experiment config, or an experiment.json archive from an
/// earlier run (selected by the .json extension). Unknown keys are errors.
inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.extension() == ".json") {
    json j;
    try {
      j = json::parse(buf.str());
    } catch (const json::parse_error& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
    return config_from_json(j, {"schema_version", "completed"});
  }
  return config_from_json(toml_config_to_json(buf.str(), path.string()));
}

}  // namespace phs
