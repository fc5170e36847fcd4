#pragma once

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "phs/error.hpp"
#include "phs/format.hpp"
#include "phs/space.hpp"
#include "phs/subprocess.hpp"

namespace phs {

/// 1 + sum x_i^2/4000 - prod cos(x_i/sqrt(i)), i from 1. Minimum 0 at the origin.
inline double griewank(std::span<const double> x) {
  if (x.empty()) throw ValidationError("griewank: empty input");
  double sum = 0.0;
  double prod = 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum += x[i] * x[i] / 4000.0;
    prod *= std::cos(x[i] / std::sqrt(static_cast<double>(i + 1)));
  }
  return 1.0 + sum - prod;
}

inline double sphere(std::span<const double> x) {
  if (x.empty()) throw ValidationError("sphere: empty input");
  double sum = 0.0;
  for (double v : x) sum += v * v;
  return sum;
}

inline double rosenbrock(std::span<const double> x) {
  if (x.size() < 2) throw ValidationError("rosenbrock: needs at least two dimensions");
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double a = x[i + 1] - x[i] * x[i];
    const double b = 1.0 - x[i];
    sum += 100.0 * a * a + b * b;
  }
  return sum;
}

/// sum (x_i - 0.3)^2
inline double offset_quadratic(std::span<const double> x) {
  if (x.empty()) throw ValidationError("sleep_then_quadratic: empty input");
  double sum = 0.0;
  for (double v : x) sum += (v - 0.3) * (v - 0.3);
  return sum;
}

struct BuiltinInfo {
  std::string_view name;
  std::string_view description;
};

inline constexpr BuiltinInfo kBuiltinTargets[] = {
    {"griewank", "1 + sum x_i^2/4000 - prod cos(x_i/sqrt(i)); minimum 0 at the origin"},
    {"sphere", "sum x_i^2; minimum 0 at the origin"},
    {"rosenbrock", "sum 100(x_{i+1}-x_i^2)^2 + (1-x_i)^2; minimum 0 at (1,...,1); needs >= 2 dims"},
    {"sleep_then_quadratic", "sleeps target.sleep seconds, then sum (x_i-0.3)^2"},
};

inline bool is_builtin(std::string_view name) {
  for (const auto& b : kBuiltinTargets) {
    if (b.name == name) return true;
  }
  return false;
}

/// The black-box description from the experiment config.
struct TargetSpec {
  enum class Kind { builtin, subprocess };
  Kind kind = Kind::builtin;
  /// Builtin name.
  std::string name;
  /// sleep_then_quadratic only.
  double sleep_seconds = 0.0;
  /// Program and fixed leading arguments. `{name}` in an argument is replaced
  /// by that parameter's value.
  std::vector<std::string> command;
  /// Unset means no limit.
  std::optional<double> timeout_seconds;

  void validate() const {
    if (kind == Kind::builtin) {
      if (!is_builtin(name)) throw ValidationError("target: unknown builtin '" + name + "'");
      if (!(sleep_seconds >= 0.0)) throw ValidationError("target: sleep must be nonnegative");
    } else if (command.empty() || command.front().empty()) {
      throw ValidationError("target: subprocess command must not be empty");
    }
    if (timeout_seconds && !(*timeout_seconds > 0.0)) throw ValidationError("target: timeout must be positive");
  }
};

/// Continuous parameter values in space order.
inline std::vector<double> continuous_values(const ParameterSet& set, const SearchSpace& space) {
  std::vector<double> x;
  for (const auto& spec : space.specs()) {
    if (spec.is_continuous()) x.push_back(set.number(spec.name));
  }
  return x;
}

inline double eval_builtin(std::string_view name, const ParameterSet& set, const SearchSpace& space,
                           double sleep_seconds = 0.0) {
  const auto x = continuous_values(set, space);
  if (name == "griewank") return griewank(x);
  if (name == "sphere") return sphere(x);
  if (name == "rosenbrock") return rosenbrock(x);
  if (name == "sleep_then_quadratic") {
    if (sleep_seconds > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(sleep_seconds));
    return offset_quadratic(x);
  }
  throw ValidationError("unknown builtin target '" + std::string(name) + "'");
}

/// PHS_PARAM_<NAME>: upper-cased, non-alphanumerics replaced by '_'.
inline std::string param_env_name(std::string_view name) {
  std::string out = "PHS_PARAM_";
  for (unsigned char c : name) out += std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_';
  return out;
}

/// Last non-empty line of `output`, without its line terminator.
inline std::string_view last_line(std::string_view output) {
  while (!output.empty()) {
    auto end = output.find_last_not_of("\r\n");
    if (end == std::string_view::npos) return {};
    output = output.substr(0, end + 1);
    const auto start = output.find_last_of('\n');
    std::string_view line = start == std::string_view::npos ? output : output.substr(start + 1);
    if (!trim(line).empty()) return line;
    output = start == std::string_view::npos ? std::string_view{} : output.substr(0, start);
  }
  return {};
}

/// Runs one evaluation of an external program.
///
/// Every parameter is passed twice: as `--param name=value` arguments after
/// the command, and as PHS_PARAM_<NAME> environment variables. PHS_REP holds
/// the 0-based repetition index. The last non-empty stdout line must parse as
/// a real number. Throws TargetError (timeout, spawn, exit, parse) otherwise.
inline double eval_subprocess(const TargetSpec& spec, const ParameterSet& set, std::size_t repetition_index) {
  if (spec.command.empty()) throw ValidationError("subprocess target: empty command");

  std::vector<std::string> argv;
  for (const auto& arg : spec.command) {
    std::string a = arg;
    for (const auto& [name, value] : set.entries()) {
      const std::string key = "{" + name + "}";
      for (auto pos = a.find(key); pos != std::string::npos; pos = a.find(key, pos)) {
        const auto text = format_value(value);
        a.replace(pos, key.size(), text);
        pos += text.size();
      }
    }
    argv.push_back(std::move(a));
  }
  std::vector<std::pair<std::string, std::string>> env;
  for (const auto& [name, value] : set.entries()) {
    argv.push_back("--param");
    argv.push_back(name + "=" + format_value(value));
    env.emplace_back(param_env_name(name), format_value(value));
  }
  env.emplace_back("PHS_REP", std::to_string(repetition_index));

  const ProcessResult run = run_process(argv, env, spec.timeout_seconds);
  if (run.timed_out) {
    throw TargetError(TargetError::Kind::timeout,
                      "timeout: target exceeded " + format_double(*spec.timeout_seconds) + " s; stderr: " + run.err);
  }
  if (run.exit_code != 0) {
    throw TargetError(TargetError::Kind::exit, "exit: target exited with status " + std::to_string(run.exit_code) +
                                                   "; stderr: " + run.err);
  }
  const auto line = last_line(run.out);
  const auto value = parse_double(line);
  if (!value) {
    throw TargetError(TargetError::Kind::parse,
                      "parse: last stdout line '" + std::string(trim(line)) + "' is not a number; stderr: " + run.err);
  }
  return *value;
}

/// f(set, repetition_index) -> result. Throws on failure.
using Objective = std::function<double(const ParameterSet&, std::size_t)>;

/// Builds the callable for a target spec. Builtins that overrun the timeout
/// are reported as timed out once they return; subprocesses are killed.
inline Objective make_objective(const TargetSpec& spec, const SearchSpace& space) {
  spec.validate();
  if (spec.kind == TargetSpec::Kind::subprocess) {
    return [spec](const ParameterSet& set, std::size_t rep) { return eval_subprocess(spec, set, rep); };
  }
  return [spec, space](const ParameterSet& set, std::size_t) {
    const auto start = std::chrono::steady_clock::now();
    const double v = eval_builtin(spec.name, set, space, spec.sleep_seconds);
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
    if (spec.timeout_seconds && took.count() > *spec.timeout_seconds)
      throw TargetError(TargetError::Kind::timeout,
                        "timeout: target exceeded " + format_double(*spec.timeout_seconds) + " s");
    return v;
  };
}

}  // namespace phs
