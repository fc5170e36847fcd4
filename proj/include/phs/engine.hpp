#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "phs/acquisition.hpp"
#include "phs/error.hpp"
#include "phs/experiment.hpp"
#include "phs/plan.hpp"
#include "phs/rng.hpp"
#include "phs/space.hpp"
#include "phs/store.hpp"
#include "phs/surrogate.hpp"
#include "phs/targets.hpp"

namespace phs {

inline std::int64_t utc_micros() {
  return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

/// Workers that run the master's task loop. The serial back end runs it on the
/// calling thread and is observably identical to a pool of size 1.
struct WorkerPool {
  std::size_t size = 1;
  Backend backend = Backend::pool;

  /// Calls worker_loop(worker_id) once per worker and waits for all of them.
  /// The first exception thrown by any worker is rethrown here.
  template <typename Fn>
  void run(Fn&& worker_loop) const {
    if (size < 1) throw ValidationError("worker pool size must be at least 1");
    if (backend == Backend::serial) {
      worker_loop(std::size_t{0});
      return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> threads;
    threads.reserve(size);
    for (std::size_t w = 0; w < size; ++w) {
      threads.emplace_back([&, w] {
        try {
          worker_loop(w);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
  }
};

/// One scheduled plan entry.
struct Task {
  const PlanEntry* entry = nullptr;
  /// Derived from (experiment seed, set_index) only.
  std::uint64_t seed = 0;
  std::size_t repetitions = 1;
};

inline Task make_task(const PlanEntry& entry, std::uint64_t experiment_seed, std::size_t repetitions) {
  if (repetitions < 1) throw ValidationError("task: repetitions must be at least 1");
  return {&entry, derive_seed(experiment_seed, entry.set_index), repetitions};
}

/// Substreams of a task seed.
inline constexpr std::uint64_t kRandomStream = 0;
inline constexpr std::uint64_t kBayesStream = 1;

struct ResolutionSettings {
  AcquisitionConfig acquisition;
  std::size_t min_init = 3;
};

struct ResolvedParameters {
  ParameterSet values;
  /// Aligned with the space.
  std::vector<Provenance> provenance;
};

/// Unit-cube training data for a GP over `dims`, from ok records with finite results.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> training_data(const SearchSpace& space,
                                                                 std::span<const TrialRecord> snapshot,
                                                                 const std::vector<std::string>& dims) {
  std::vector<const TrialRecord*> usable;
  for (const auto& r : snapshot) {
    if (r.ok() && std::isfinite(r.result) && r.values.size() == space.size()) usable.push_back(&r);
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(usable.size()), static_cast<Eigen::Index>(dims.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(usable.size()));
  for (std::size_t i = 0; i < usable.size(); ++i) {
    const auto unit = normalize(space, usable[i]->values, dims);
    for (std::size_t k = 0; k < unit.size(); ++k)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = std::clamp(unit[k], 0.0, 1.0);
    y(static_cast<Eigen::Index>(i)) = usable[i]->result;
  }
  return {std::move(x), std::move(y)};
}

/// Resolves every tag of the task's entry to a value.
///
/// Random values come from the task's random substream, drawn for the whole
/// space in order, so they do not depend on scheduling. Bayes-tagged
/// parameters fall back to those random draws until `min_init` usable trials
/// exist; afterwards a GP is fitted on the snapshot restricted to the bayes
/// dimensions and the proposal accounts for in-flight `pending` sets.
inline ResolvedParameters resolve_parameters(const SearchSpace& space, const Task& task,
                                             std::span<const TrialRecord> snapshot,
                                             const std::vector<ParameterSet>& pending,
                                             const ResolutionSettings& settings) {
  const PlanEntry& entry = *task.entry;
  Rng random_rng(derive_seed(task.seed, 0, kRandomStream));
  const ParameterSet draws = sample_random(space, random_rng);

  ResolvedParameters out;
  std::map<std::string, Value> bayes_values;
  const auto bayes_dims = entry.bayes_names();
  bool fallback = false;
  if (!bayes_dims.empty()) {
    auto [x, y] = training_data(space, snapshot, bayes_dims);
    if (static_cast<std::size_t>(y.size()) < std::max<std::size_t>(settings.min_init, 1)) {
      fallback = true;
    } else {
      const GpModel model = fit_gp_auto(x, y);
      std::vector<Eigen::VectorXd> pending_points;
      for (const auto& p : pending) {
        bool complete = true;
        for (const auto& d : bayes_dims) complete = complete && p.contains(d);
        if (!complete) continue;
        const auto unit = normalize(space, p, bayes_dims);
        pending_points.push_back(Eigen::Map<const Eigen::VectorXd>(unit.data(), static_cast<Eigen::Index>(unit.size()))
                                     .cwiseMax(0.0)
                                     .cwiseMin(1.0));
      }
      Rng bayes_rng(derive_seed(task.seed, 0, kBayesStream));
      const Proposal proposal = propose(model, pending_points, settings.acquisition, bayes_rng);
      ParameterSet proposed;
      denormalize(space, std::vector<double>(proposal.point.data(), proposal.point.data() + proposal.point.size()),
                  proposed, bayes_dims);
      for (const auto& [name, value] : proposed.entries()) bayes_values[name] = value;
    }
  }

  for (const auto& [name, tag] : entry.assignments) {
    if (const auto* e = std::get_if<ExplicitTag>(&tag)) {
      out.values.set(name, e->value);
      out.provenance.push_back(Provenance::explicit_value);
    } else if (std::holds_alternative<RandomTag>(tag)) {
      out.values.set(name, draws.at(name));
      out.provenance.push_back(Provenance::random);
    } else if (fallback) {
      out.values.set(name, draws.at(name));
      out.provenance.push_back(Provenance::random_fallback);
    } else {
      out.values.set(name, bayes_values.at(name));
      out.provenance.push_back(Provenance::bayes);
    }
  }
  validate_set(space, out.values);
  return out;
}

/// Evaluates the resolved set `task.repetitions` times. The headline result is
/// the mean; any failing or non-finite repetition fails the whole record.
inline TrialRecord execute_trial(const Task& task, const ResolvedParameters& resolved, const Objective& objective,
                                 std::size_t worker_id) {
  TrialRecord r;
  r.set_index = task.entry->set_index;
  r.values = resolved.values;
  r.provenance = resolved.provenance;
  r.worker_id = worker_id;
  r.start_ts = utc_micros();
  r.status = TrialStatus::ok;
  for (std::size_t rep = 0; rep < task.repetitions; ++rep) {
    try {
      const double v = objective(resolved.values, rep);
      r.repetition_results.push_back(v);
      if (!std::isfinite(v)) {
        r.status = TrialStatus::failed;
        r.diagnostic = "invalid: repetition " + std::to_string(rep) + " returned a non-finite value";
        break;
      }
    } catch (const std::exception& e) {
      r.status = TrialStatus::failed;
      r.diagnostic = e.what();
      break;
    }
  }
  r.end_ts = std::max(utc_micros(), r.start_ts);
  if (r.ok()) {
    double sum = 0.0;
    for (double v : r.repetition_results) sum += v;
    r.result = sum / static_cast<double>(r.repetition_results.size());
  }
  return r;
}

struct ExperimentSummary {
  std::size_t total = 0;
  std::size_t failed = 0;
  /// Lowest ok result; empty only if every trial failed.
  std::optional<TrialRecord> best;
  std::chrono::duration<double> wall{0.0};
  /// All records in completion order.
  std::vector<TrialRecord> records;
};

/// The master loop: workers take the lowest unstarted plan entry, resolve it
/// against a snapshot of finished trials, evaluate it and append the record.
/// With a nonempty config.output, trials.csv and experiment.json are written
/// there; the completeness marker is set only after the last append.
inline ExperimentSummary run_experiment(const ExperimentConfig& config, const Objective& objective,
                                        const WorkerPool& pool) {
  config.validate();
  const SearchPlan plan = config.build();
  const auto started = std::chrono::steady_clock::now();

  std::optional<TrialStore> store_holder;
  if (config.output.empty()) {
    store_holder.emplace(config.space);
  } else {
    std::error_code ec;
    std::filesystem::create_directories(config.output, ec);
    if (ec) throw StorageError("cannot create output directory " + config.output.string() + ": " + ec.message());
    if (std::filesystem::exists(config.output / kTrialsFile))
      throw StorageError(config.output.string() + " already holds an experiment");
    store_holder.emplace(config.space, config.output / kTrialsFile);
    write_sidecar(config.output, config, false);
  }
  TrialStore& store = *store_holder;

  const ResolutionSettings settings{config.acquisition, config.min_init};
  std::mutex master_mutex;
  std::size_t next = 0;
  std::map<std::size_t, std::optional<ParameterSet>> in_flight;

  pool.run([&](std::size_t worker_id) {
    while (true) {
      std::size_t index = 0;
      TrialStore::Snapshot snapshot;
      std::vector<ParameterSet> pending;
      {
        std::lock_guard lock(master_mutex);
        if (next >= plan.size()) return;
        index = next++;
        snapshot = store.snapshot();
        for (const auto& [i, set] : in_flight) {
          if (set) pending.push_back(*set);
        }
        in_flight.emplace(index, std::nullopt);
      }

      const Task task = make_task(plan.entries[index], config.seed, config.repetitions);
      TrialRecord record;
      try {
        const ResolvedParameters resolved = resolve_parameters(config.space, task, *snapshot, pending, settings);
        {
          std::lock_guard lock(master_mutex);
          in_flight[index] = resolved.values;
        }
        record = execute_trial(task, resolved, objective, worker_id);
      } catch (const std::exception& e) {
        record = TrialRecord{};
        record.set_index = index;
        record.worker_id = worker_id;
        record.start_ts = record.end_ts = utc_micros();
        record.status = TrialStatus::failed;
        record.diagnostic = std::string("resolution: ") + e.what();
        for (const auto& [name, tag] : task.entry->assignments) {
          record.provenance.push_back(std::holds_alternative<ExplicitTag>(tag)  ? Provenance::explicit_value
                                      : std::holds_alternative<BayesTag>(tag) ? Provenance::bayes
                                                                               : Provenance::random);
        }
      }
      store.append(std::move(record));
      std::lock_guard lock(master_mutex);
      in_flight.erase(index);
    }
  });

  if (!config.output.empty()) write_sidecar(config.output, config, true);

  ExperimentSummary summary;
  const auto snapshot = store.snapshot();
  summary.records = *snapshot;
  summary.total = summary.records.size();
  for (const auto& r : summary.records) summary.failed += r.ok() ? 0 : 1;
  if (summary.failed < summary.total) summary.best = best_trial(summary.records);
  summary.wall = std::chrono::steady_clock::now() - started;
  return summary;
}

/// Runs with the config's own target, worker count and back end.
inline ExperimentSummary run_experiment(const ExperimentConfig& config) {
  config.validate();
  return run_experiment(config, make_objective(config.target, config.space),
                        WorkerPool{config.workers, config.backend});
}

}  // namespace phs
