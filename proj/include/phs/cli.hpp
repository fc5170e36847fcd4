#pragma once

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "phs/config.hpp"
#include "phs/engine.hpp"
#include "phs/experiment.hpp"
#include "phs/report.hpp"
#include "phs/store.hpp"
#include "phs/targets.hpp"

namespace phs::cli {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitAllFailed = 2;

struct RunOverrides {
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> repetitions;
  std::optional<std::filesystem::path> output;
};

inline std::string describe_set(const TrialRecord& r) {
  std::string out;
  for (const auto& [name, value] : r.values.entries()) {
    if (!out.empty()) out += ' ';
    out += name + "=" + format_value(value);
  }
  return out;
}

/// Loads the config, applies flag overrides, runs the experiment and prints
/// the best trial. The output directory is only created once the config is
/// known to be valid.
inline int cmd_run(const std::filesystem::path& config_path, const RunOverrides& overrides, std::ostream& out,
                   std::ostream& err) {
  ExperimentConfig config;
  try {
    config = parse_config(config_path);
    if (overrides.workers) config.workers = *overrides.workers;
    if (overrides.seed) config.seed = *overrides.seed;
    if (overrides.repetitions) config.repetitions = *overrides.repetitions;
    if (overrides.output) config.output = *overrides.output;
    config.validate();
    if (config.output.empty()) throw ValidationError("no output directory: set 'output' in the config or pass -o");
    if (std::filesystem::exists(config.output / kTrialsFile))
      throw ValidationError(config.output.string() + " already holds an experiment");
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }

  ExperimentSummary summary;
  try {
    summary = run_experiment(config);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }

  out << "trials: " << summary.total << ", failed: " << summary.failed << ", wall: " << std::fixed
      << std::setprecision(2) << summary.wall.count() << " s\n";
  out.unsetf(std::ios::floatfield);
  if (!summary.best) {
    err << "error: all trials failed\n";
    return kExitAllFailed;
  }
  out << "best: set " << summary.best->set_index << " result " << format_double(summary.best->result) << " "
      << describe_set(*summary.best) << '\n';
  return kExitOk;
}

inline const std::vector<std::string>& figure_kinds() {
  static const std::vector<std::string> kinds = {"result_over_index", "scatter", "parallel_coords", "worker_timeline",
                                                 "contour"};
  return kinds;
}

/// Renders figures from an experiment directory into <dir>/figures and prints
/// the best set. An empty selection means every applicable figure.
inline int cmd_report(const std::filesystem::path& dir, std::vector<std::string> figures,
                      std::optional<std::string> x_param, std::optional<std::string> y_param, std::ostream& out,
                      std::ostream& err) {
  LoadedExperiment exp;
  try {
    exp = load_experiment(dir);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  if (!exp.completed)
    err << "warning: experiment in " << dir.string()
        << " has no completeness marker (interrupted run); using the rows available\n";
  if (x_param.has_value() != y_param.has_value()) {
    err << "error: --x and --y must be given together\n";
    return kExitError;
  }

  const SearchSpace& space = exp.config.space;
  std::vector<std::string> numeric;
  for (const auto& s : space.specs()) {
    if (s.is_numeric()) numeric.push_back(s.name);
  }
  const bool explicit_selection = !figures.empty();
  if (!x_param && numeric.size() >= 2) {
    x_param = numeric[0];
    y_param = numeric[1];
  }
  if (!explicit_selection) {
    figures = {"result_over_index", "parallel_coords", "worker_timeline"};
    if (x_param) {
      figures.insert(figures.begin() + 1, "scatter");
      figures.push_back("contour");
    }
    if (space.size() < 2) std::erase(figures, std::string("parallel_coords"));
  }

  const auto fig_dir = dir / "figures";
  const std::size_t lanes = exp.config.backend == Backend::serial ? 1 : exp.config.workers;
  int status = kExitOk;
  for (const auto& kind : figures) {
    try {
      report::Figure fig;
      if (kind == "result_over_index") {
        fig = report::result_over_index(exp.records);
      } else if (kind == "parallel_coords") {
        fig = report::parallel_coords(exp.records, space);
      } else if (kind == "worker_timeline") {
        fig = report::worker_timeline(exp.records, lanes);
      } else if (kind == "scatter" || kind == "contour") {
        if (!x_param) throw ValidationError(kind + " needs two numeric parameters (--x NAME --y NAME)");
        fig = kind == "scatter" ? report::scatter_2d(exp.records, space, *x_param, *y_param)
                                : report::contour(exp.records, space, *x_param, *y_param);
      } else {
        throw ValidationError("unknown figure kind '" + kind + "'");
      }
      report::write_figure(fig, fig_dir);
      out << "wrote " << (fig_dir / (fig.name + ".svg")).string() << '\n';
    } catch (const Error& e) {
      if (explicit_selection) {
        err << "error: " << kind << ": " << e.what() << '\n';
        status = kExitError;
      } else {
        err << "warning: skipped " << kind << ": " << e.what() << '\n';
      }
    }
  }

  std::size_t failed = 0;
  for (const auto& r : exp.records) failed += r.ok() ? 0 : 1;
  out << "trials: " << exp.records.size() << ", failed: " << failed << '\n';
  try {
    const TrialRecord& best = best_trial(exp.records);
    out << "best set: " << best.set_index << '\n';
    out << std::left << std::setw(24) << "parameter" << "value\n";
    for (const auto& [name, value] : best.values.entries()) out << std::setw(24) << name << format_value(value) << '\n';
    out << std::setw(24) << "result" << format_double(best.result) << '\n';
    out << std::right;
  } catch (const Error&) {
    out << "best set: none (no successful trials)\n";
  }
  return status;
}

inline int cmd_list_targets(std::ostream& out) {
  for (const auto& t : kBuiltinTargets) out << std::left << std::setw(22) << t.name << t.description << '\n';
  out << std::right;
  return kExitOk;
}

/// Entry point for the `phs` executable.
inline int main(int argc, char** argv) {
  CLI::App app{"phs: parallel hyperparameter search"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  std::string config_path;
  RunOverrides overrides;
  std::size_t workers = 0, repetitions = 0;
  std::uint64_t seed = 0;
  std::string output;
  run->add_option("-c,--config", config_path, "experiment config (TOML, or an experiment.json archive)")->required();
  auto* workers_opt = run->add_option("--workers", workers, "number of concurrent workers")->check(CLI::PositiveNumber);
  auto* seed_opt = run->add_option("--seed", seed, "experiment seed");
  auto* reps_opt = run->add_option("--repetitions", repetitions, "evaluations averaged per set")->check(CLI::PositiveNumber);
  auto* out_opt = run->add_option("-o,--output", output, "output directory");

  auto* rep = app.add_subcommand("report", "render figures from an experiment directory");
  std::string dir;
  std::vector<std::string> figs;
  std::string x_name, y_name;
  rep->add_option("dir", dir, "experiment directory")->required();
  rep->add_option("--fig", figs, "figure kind (repeatable)")->check(CLI::IsMember(figure_kinds()));
  auto* x_opt = rep->add_option("--x", x_name, "x parameter for scatter/contour");
  auto* y_opt = rep->add_option("--y", y_name, "y parameter for scatter/contour");

  auto* list = app.add_subcommand("list-targets", "list the built-in objective functions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  if (run->parsed()) {
    if (*workers_opt) overrides.workers = workers;
    if (*seed_opt) overrides.seed = seed;
    if (*reps_opt) overrides.repetitions = repetitions;
    if (*out_opt) overrides.output = output;
    return cmd_run(config_path, overrides, std::cout, std::cerr);
  }
  if (rep->parsed()) {
    return cmd_report(dir, figs, *x_opt ? std::optional(x_name) : std::nullopt,
                      *y_opt ? std::optional(y_name) : std::nullopt, std::cout, std::cerr);
  }
  if (list->parsed()) return cmd_list_targets(std::cout);
  return kExitError;
}

}  // namespace phs::cli
