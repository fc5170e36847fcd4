#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "phs/acquisition.hpp"
#include "phs/error.hpp"
#include "phs/plan.hpp"
#include "phs/space.hpp"
#include "phs/store.hpp"
#include "phs/targets.hpp"

namespace phs {

enum class Backend { pool, serial };

struct PlanSettings {
  std::vector<ExplicitRow> explicit_rows;
  std::size_t n_random = 0;
  std::size_t n_bayes = 0;
  std::vector<std::string> bayes_params;
};

/// Everything needed to run and replay an experiment.
struct ExperimentConfig {
  SearchSpace space;
  PlanSettings plan;
  TargetSpec target;
  std::size_t workers = 1;
  Backend backend = Backend::pool;
  std::uint64_t seed = 0;
  std::size_t repetitions = 1;
  AcquisitionConfig acquisition;
  /// Finished trials required before the first GP fit.
  std::size_t min_init = 3;
  /// Empty: keep trials in memory only.
  std::filesystem::path output;

  SearchPlan build() const {
    return build_plan(space, plan.explicit_rows, plan.n_random, plan.n_bayes, plan.bayes_params);
  }

  /// Semantic checks beyond what the individual types enforce.
  void validate() const {
    if (space.empty()) throw ValidationError("config: search space is empty");
    if (workers < 1) throw ValidationError("config: 'workers' must be at least 1");
    if (repetitions < 1) throw ValidationError("config: 'repetitions' must be at least 1");
    target.validate();
    acquisition.validate();
    (void)build();
  }
};

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// JSON schema. The TOML config is converted to JSON and read by the same code,
// so both formats share one strict validator.
// ---------------------------------------------------------------------------

using nlohmann::json;

namespace detail {

inline std::string join_path(std::string_view base, std::string_view key) {
  return base.empty() ? std::string(key) : std::string(base) + "." + std::string(key);
}

inline void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ValidationError("config: '" + path + "' must be a table");
}

inline void check_keys(const json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || a == key;
    if (!known) throw ValidationError("config: unknown key '" + join_path(path, key) + "'");
  }
}

inline double get_real(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError("config: '" + path + "' must be a number");
  return j.get<double>();
}

inline std::uint64_t get_count(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
  throw ValidationError("config: '" + path + "' must be a nonnegative integer");
}

inline std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ValidationError("config: '" + path + "' must be a string");
  return j.get<std::string>();
}

inline bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ValidationError("config: '" + path + "' must be a boolean");
  return j.get<bool>();
}

inline std::vector<std::string> get_strings(const json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError("config: '" + path + "' must be an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_string(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline ParameterSpec spec_from_json(const json& j, const std::string& path) {
  expect_object(j, path);
  if (!j.contains("name")) throw ValidationError("config: '" + path + ".name' is required");
  if (!j.contains("kind")) throw ValidationError("config: '" + path + ".kind' is required");
  const std::string name = get_string(j["name"], path + ".name");
  const std::string kind = get_string(j["kind"], path + ".kind");
  if (kind == "continuous") {
    check_keys(j, path, {"name", "kind", "low", "high", "bayes"});
    if (!j.contains("low") || !j.contains("high"))
      throw ValidationError("config: '" + path + "' needs 'low' and 'high'");
    const bool bayes = j.contains("bayes") ? get_bool(j["bayes"], path + ".bayes") : true;
    return ParameterSpec::continuous(name, get_real(j["low"], path + ".low"), get_real(j["high"], path + ".high"),
                                     bayes);
  }
  if (kind == "discrete") {
    check_keys(j, path, {"name", "kind", "values", "bayes"});
    if (j.contains("bayes") && get_bool(j["bayes"], path + ".bayes"))
      throw ValidationError("config: '" + path + ".bayes': only continuous parameters can be optimized by BO");
    if (!j.contains("values") || !j["values"].is_array())
      throw ValidationError("config: '" + path + ".values' must be an array of numbers");
    std::vector<double> values;
    for (std::size_t i = 0; i < j["values"].size(); ++i)
      values.push_back(get_real(j["values"][i], path + ".values[" + std::to_string(i) + "]"));
    return ParameterSpec::discrete(name, std::move(values));
  }
  if (kind == "categorical" || kind == "opaque") {
    check_keys(j, path, {"name", "kind", "values", "bayes"});
    if (j.contains("bayes") && get_bool(j["bayes"], path + ".bayes"))
      throw ValidationError("config: '" + path + ".bayes': only continuous parameters can be optimized by BO");
    if (!j.contains("values")) throw ValidationError("config: '" + path + ".values' is required");
    auto values = get_strings(j["values"], path + ".values");
    return kind == "opaque" ? ParameterSpec::opaque(name, std::move(values))
                            : ParameterSpec::categorical(name, std::move(values));
  }
  throw ValidationError("config: '" + path + ".kind' must be continuous, discrete, categorical or opaque");
}

inline json spec_to_json(const ParameterSpec& s) {
  json j = {{"name", s.name}, {"kind", std::string(s.kind_name())}};
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Continuous>) {
          j["low"] = k.lo;
          j["high"] = k.hi;
          j["bayes"] = s.bayes_eligible;
        } else {
          j["values"] = k.values;
        }
      },
      s.kind);
  return j;
}

inline json value_to_json(const Value& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::get<std::string>(v);
}

}  // namespace detail

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["backend"] = c.backend == Backend::serial ? "serial" : "pool";
  j["repetitions"] = c.repetitions;
  j["min_init"] = c.min_init;
  if (!c.output.empty()) j["output"] = c.output.string();

  j["space"] = json::array();
  for (const auto& s : c.space.specs()) j["space"].push_back(detail::spec_to_json(s));

  json plan = {{"n_random", c.plan.n_random}, {"n_bayes", c.plan.n_bayes}, {"bayes_params", c.plan.bayes_params}};
  plan["explicit"] = json::array();
  for (const auto& row : c.plan.explicit_rows) {
    json r = json::object();
    for (const auto& [k, v] : row) r[k] = detail::value_to_json(v);
    plan["explicit"].push_back(std::move(r));
  }
  j["plan"] = std::move(plan);

  json target;
  if (c.target.kind == TargetSpec::Kind::builtin) {
    target = {{"kind", "builtin"}, {"name", c.target.name}, {"sleep", c.target.sleep_seconds}};
  } else {
    target = {{"kind", "subprocess"}, {"command", c.target.command}};
  }
  if (c.target.timeout_seconds) target["timeout"] = *c.target.timeout_seconds;
  j["target"] = std::move(target);

  json acq = {{"n_candidates", c.acquisition.n_candidates}, {"pending_radius", c.acquisition.pending_radius}};
  if (c.acquisition.xi) acq["xi"] = *c.acquisition.xi;
  j["acquisition"] = std::move(acq);
  return j;
}

/// Strict reader: unknown keys and type mismatches are errors naming the key
/// path. `extra_keys` lists top-level keys to tolerate (the sidecar's own).
inline ExperimentConfig config_from_json(const json& j, std::initializer_list<std::string_view> extra_keys = {}) {
  using namespace detail;
  expect_object(j, "<root>");
  for (const auto& [key, value] : j.items()) {
    static constexpr std::string_view known[] = {"seed",   "workers", "backend", "repetitions", "min_init",
                                                 "output", "space",   "plan",    "target",      "acquisition"};
    bool ok = std::find(std::begin(known), std::end(known), key) != std::end(known);
    for (auto e : extra_keys) ok = ok || e == key;
    if (!ok) throw ValidationError("config: unknown key '" + key + "'");
  }

  ExperimentConfig c;
  if (!j.contains("seed"))
    throw ValidationError("config: 'seed' is required; set an explicit seed so the experiment can be replayed");
  c.seed = get_count(j["seed"], "seed");
  if (j.contains("workers")) c.workers = get_count(j["workers"], "workers");
  if (j.contains("repetitions")) c.repetitions = get_count(j["repetitions"], "repetitions");
  if (j.contains("min_init")) c.min_init = get_count(j["min_init"], "min_init");
  if (j.contains("output")) c.output = get_string(j["output"], "output");
  if (j.contains("backend")) {
    const auto b = get_string(j["backend"], "backend");
    if (b == "pool") {
      c.backend = Backend::pool;
    } else if (b == "serial") {
      c.backend = Backend::serial;
    } else {
      throw ValidationError("config: 'backend' must be \"pool\" or \"serial\"");
    }
  }

  if (!j.contains("space") || !j["space"].is_array())
    throw ValidationError("config: 'space' must be an array of parameter tables");
  std::vector<ParameterSpec> specs;
  for (std::size_t i = 0; i < j["space"].size(); ++i)
    specs.push_back(spec_from_json(j["space"][i], "space[" + std::to_string(i) + "]"));
  c.space = SearchSpace::define(std::move(specs));

  if (!j.contains("plan")) throw ValidationError("config: 'plan' table is required");
  const json& plan = j["plan"];
  expect_object(plan, "plan");
  check_keys(plan, "plan", {"n_random", "n_bayes", "bayes_params", "explicit"});
  if (plan.contains("n_random")) c.plan.n_random = get_count(plan["n_random"], "plan.n_random");
  if (plan.contains("n_bayes")) c.plan.n_bayes = get_count(plan["n_bayes"], "plan.n_bayes");
  if (plan.contains("bayes_params")) {
    c.plan.bayes_params = get_strings(plan["bayes_params"], "plan.bayes_params");
    for (std::size_t i = 0; i < c.plan.bayes_params.size(); ++i) {
      const auto& name = c.plan.bayes_params[i];
      const std::string path = "plan.bayes_params[" + std::to_string(i) + "]";
      if (!c.space.index_of(name)) throw ValidationError("config: '" + path + "': unknown parameter '" + name + "'");
      if (!c.space.spec(name).bayes_eligible)
        throw ValidationError("config: '" + path + "': parameter '" + name +
                              "' is not continuous, so it cannot be optimized by BO");
    }
  }
  if (plan.contains("explicit")) {
    if (!plan["explicit"].is_array()) throw ValidationError("config: 'plan.explicit' must be an array of tables");
    for (std::size_t i = 0; i < plan["explicit"].size(); ++i) {
      const std::string path = "plan.explicit[" + std::to_string(i) + "]";
      const json& row = plan["explicit"][i];
      expect_object(row, path);
      ExplicitRow out;
      for (const auto& [name, v] : row.items()) {
        const std::string key = path + "." + name;
        if (!c.space.index_of(name)) throw ValidationError("config: unknown key '" + key + "' (no such parameter)");
        Value value = c.space.spec(name).is_numeric() ? Value{get_real(v, key)} : Value{get_string(v, key)};
        try {
          validate_value(c.space.spec(name), value);
        } catch (const ValidationError& e) {
          throw ValidationError("config: '" + key + "': " + e.what());
        }
        out.emplace(name, std::move(value));
      }
      c.plan.explicit_rows.push_back(std::move(out));
    }
  }

  if (!j.contains("target")) throw ValidationError("config: 'target' table is required");
  const json& t = j["target"];
  expect_object(t, "target");
  const std::string kind = t.contains("kind") ? get_string(t["kind"], "target.kind") : "builtin";
  if (kind == "builtin") {
    check_keys(t, "target", {"kind", "name", "sleep", "timeout"});
    c.target.kind = TargetSpec::Kind::builtin;
    if (!t.contains("name")) throw ValidationError("config: 'target.name' is required");
    c.target.name = get_string(t["name"], "target.name");
    if (t.contains("sleep")) c.target.sleep_seconds = get_real(t["sleep"], "target.sleep");
  } else if (kind == "subprocess") {
    check_keys(t, "target", {"kind", "command", "timeout"});
    c.target.kind = TargetSpec::Kind::subprocess;
    if (!t.contains("command")) throw ValidationError("config: 'target.command' is required");
    c.target.command = get_strings(t["command"], "target.command");
  } else {
    throw ValidationError("config: 'target.kind' must be \"builtin\" or \"subprocess\"");
  }
  if (t.contains("timeout")) c.target.timeout_seconds = get_real(t["timeout"], "target.timeout");

  if (j.contains("acquisition")) {
    const json& a = j["acquisition"];
    expect_object(a, "acquisition");
    check_keys(a, "acquisition", {"xi", "n_candidates", "pending_radius"});
    if (a.contains("xi")) c.acquisition.xi = get_real(a["xi"], "acquisition.xi");
    if (a.contains("n_candidates")) c.acquisition.n_candidates = get_count(a["n_candidates"], "acquisition.n_candidates");
    if (a.contains("pending_radius"))
      c.acquisition.pending_radius = get_real(a["pending_radius"], "acquisition.pending_radius");
  }

  try {
    c.validate();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    throw ValidationError(msg.rfind("config:", 0) == 0 ? msg : "config: " + msg);
  }
  return c;
}

// ---------------------------------------------------------------------------
// experiment.json sidecar
// ---------------------------------------------------------------------------

inline constexpr std::string_view kTrialsFile = "trials.csv";
inline constexpr std::string_view kSidecarFile = "experiment.json";

/// Writes experiment.json atomically (temp file + rename).
inline void write_sidecar(const std::filesystem::path& dir, const ExperimentConfig& config, bool completed) {
  json j = config_to_json(config);
  j["schema_version"] = kSchemaVersion;
  j["completed"] = completed;
  const auto final_path = dir / kSidecarFile;
  const auto tmp = dir / (std::string(kSidecarFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
    out.flush();
    if (!out) throw StorageError("cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, final_path, ec);
  if (ec) throw StorageError("cannot replace " + final_path.string() + ": " + ec.message());
}

struct LoadedExperiment {
  ExperimentConfig config;
  /// False when the completeness marker is missing (interrupted run).
  bool completed = false;
  std::vector<TrialRecord> records;
};

inline ExperimentConfig read_sidecar_config(const std::filesystem::path& file, bool* completed = nullptr) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw StorageError("cannot open " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw StorageError(file.string() + ": " + e.what());
  }
  if (completed != nullptr) *completed = j.contains("completed") && j["completed"].is_boolean() && j["completed"].get<bool>();
  return config_from_json(j, {"schema_version", "completed"});
}

inline LoadedExperiment load_experiment(const std::filesystem::path& dir) {
  const auto trials = dir / kTrialsFile;
  const auto sidecar = dir / kSidecarFile;
  if (!std::filesystem::exists(trials)) throw StorageError("no " + std::string(kTrialsFile) + " in " + dir.string());
  if (!std::filesystem::exists(sidecar)) throw StorageError("no " + std::string(kSidecarFile) + " in " + dir.string());
  LoadedExperiment out;
  out.config = read_sidecar_config(sidecar, &out.completed);
  out.records = load_trials(trials, out.config.space);
  return out;
}

}  // namespace phs
