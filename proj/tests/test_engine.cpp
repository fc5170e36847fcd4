#include <gtest/gtest.h>

#include <atomic>
#include <set>
#include <thread>

#include "fixtures.hpp"
#include "phs/engine.hpp"

using namespace phs;

namespace {

ExperimentConfig griewank_config(std::size_t workers, std::uint64_t seed = 7) {
  ExperimentConfig cfg;
  cfg.space = SearchSpace::define({ParameterSpec::continuous("x", -5, 5), ParameterSpec::continuous("y", -5, 5)});
  cfg.plan.n_random = 15;
  cfg.plan.n_bayes = 15;
  cfg.plan.bayes_params = {"x", "y"};
  cfg.target.name = "griewank";
  cfg.workers = workers;
  cfg.seed = seed;
  return cfg;
}

std::vector<TrialRecord> by_index(std::vector<TrialRecord> records) {
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.set_index < b.set_index; });
  return records;
}

void expect_same_except_timing(std::vector<TrialRecord> a, std::vector<TrialRecord> b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    b[i].start_ts = a[i].start_ts;
    b[i].end_ts = a[i].end_ts;
    EXPECT_TRUE(a[i] == b[i]) << "record " << i;
  }
}

TrialRecord finished(const SearchSpace& space, std::size_t index, double x, double y, double result) {
  TrialRecord r;
  r.set_index = index;
  r.values.set("x", x);
  r.values.set("y", y);
  r.provenance.assign(space.size(), Provenance::random);
  r.repetition_results = {result};
  r.result = result;
  r.status = TrialStatus::ok;
  return r;
}

}  // namespace

TEST(WorkerPool, RunsEveryWorkerAndRethrows) {
  std::atomic<int> calls{0};
  WorkerPool{4, Backend::pool}.run([&](std::size_t) { ++calls; });
  EXPECT_EQ(calls.load(), 4);
  calls = 0;
  WorkerPool{4, Backend::serial}.run([&](std::size_t id) {
    EXPECT_EQ(id, 0u);
    ++calls;
  });
  EXPECT_EQ(calls.load(), 1);
  const auto failing = [](std::size_t id) {
    if (id == 1) throw std::runtime_error("boom");
  };
  EXPECT_THROW((WorkerPool{3, Backend::pool}.run(failing)), std::runtime_error);
}

TEST(Engine, GriewankWithFourWorkers) {
  const auto summary = run_experiment(griewank_config(4));
  EXPECT_EQ(summary.total, 30u);
  EXPECT_EQ(summary.failed, 0u);
  std::set<std::size_t> indices;
  std::set<std::size_t> workers;
  for (const auto& r : summary.records) {
    indices.insert(r.set_index);
    workers.insert(r.worker_id);
    EXPECT_LE(r.start_ts, r.end_ts);
    const bool bayes_slot = r.set_index >= 15;
    for (auto p : r.provenance) {
      if (bayes_slot)
        EXPECT_TRUE(p == Provenance::bayes || p == Provenance::random_fallback);
      else
        EXPECT_EQ(p, Provenance::random);
    }
  }
  EXPECT_EQ(indices.size(), 30u);
  EXPECT_EQ(*indices.rbegin(), 29u);
  for (auto w : workers) EXPECT_LT(w, 4u);
  ASSERT_TRUE(summary.best.has_value());
  EXPECT_EQ(summary.best->result, best_trial(summary.records).result);
}

TEST(Engine, SinglePoolWorkerMatchesSerialBackend) {
  auto pool = griewank_config(1);
  auto serial = griewank_config(1);
  serial.backend = Backend::serial;
  const auto a = run_experiment(pool);
  const auto b = run_experiment(serial);
  expect_same_except_timing(a.records, b.records);
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].set_index, i);
}

TEST(Engine, SerialRunsAreReproducible) {
  auto cfg = griewank_config(1);
  cfg.repetitions = 3;
  expect_same_except_timing(run_experiment(cfg).records, run_experiment(cfg).records);
}

TEST(Engine, RandomValuesDoNotDependOnPoolSize) {
  const auto one = by_index(run_experiment(griewank_config(1)).records);
  const auto four = by_index(run_experiment(griewank_config(4)).records);
  for (std::size_t i = 0; i < 15; ++i) {
    EXPECT_TRUE(one[i].values == four[i].values) << "set " << i;
    EXPECT_EQ(one[i].result, four[i].result);
  }
}

TEST(Engine, ExplicitOriginIsTheOptimum) {
  auto cfg = griewank_config(2);
  cfg.plan.explicit_rows = {{{"x", 0.0}, {"y", 0.0}}};
  cfg.plan.n_bayes = 5;
  cfg.plan.n_random = 5;
  const auto summary = run_experiment(cfg);
  ASSERT_TRUE(summary.best.has_value());
  EXPECT_EQ(summary.best->result, 0.0);
  EXPECT_EQ(summary.best->set_index, 0u);
  EXPECT_EQ(summary.best->provenance, (std::vector<Provenance>{Provenance::explicit_value, Provenance::explicit_value}));
}

TEST(Engine, BayesFallsBackWithoutEnoughTrials) {
  auto cfg = griewank_config(1);
  cfg.plan.n_random = 0;
  cfg.plan.n_bayes = 5;
  const auto records = run_experiment(cfg).records;
  for (const auto& r : records) {
    const auto expected = r.set_index < cfg.min_init ? Provenance::random_fallback : Provenance::bayes;
    EXPECT_EQ(r.provenance, (std::vector<Provenance>{expected, expected})) << "set " << r.set_index;
  }
}

TEST(Engine, ResolutionMatchesStandaloneFitAndPropose) {
  const auto cfg = griewank_config(1);
  const auto plan = cfg.build();
  std::vector<TrialRecord> snapshot;
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (std::size_t i = 0; i < 10; ++i) {
    const double x = u(gen), y = u(gen);
    const double p[] = {x, y};
    snapshot.push_back(finished(cfg.space, i, x, y, griewank(p)));
  }
  const Task task = make_task(plan.entries[20], cfg.seed, 1);
  const auto resolved = resolve_parameters(cfg.space, task, snapshot, {}, {cfg.acquisition, cfg.min_init});

  // the same steps by hand
  Eigen::MatrixXd x(10, 2);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) {
    x(i, 0) = (snapshot[i].values.number("x") + 5.0) / 10.0;
    x(i, 1) = (snapshot[i].values.number("y") + 5.0) / 10.0;
    y(i) = snapshot[i].result;
  }
  const auto model = fit_gp_auto(x, y);
  Rng rng(derive_seed(task.seed, 0, kBayesStream));
  const auto proposal = propose(model, {}, cfg.acquisition, rng);
  EXPECT_NEAR(resolved.values.number("x"), -5.0 + 10.0 * proposal.point(0), 1e-12);
  EXPECT_NEAR(resolved.values.number("y"), -5.0 + 10.0 * proposal.point(1), 1e-12);
  EXPECT_EQ(resolved.provenance, (std::vector<Provenance>{Provenance::bayes, Provenance::bayes}));

  // a pending set at the proposal pushes the next proposal away from it
  const auto moved = resolve_parameters(cfg.space, task, snapshot, {resolved.values}, {cfg.acquisition, cfg.min_init});
  const double dx = (moved.values.number("x") - resolved.values.number("x")) / 10.0;
  const double dy = (moved.values.number("y") - resolved.values.number("y")) / 10.0;
  EXPECT_GE(std::hypot(dx, dy), cfg.acquisition.pending_radius);
}

TEST(Engine, FailedTrialDoesNotStopTheRun) {
  auto cfg = griewank_config(3);
  cfg.plan.n_bayes = 0;
  cfg.plan.n_random = 12;
  const Objective flaky = [](const ParameterSet& set, std::size_t) -> double {
    if (set.number("x") > 0.0) throw TargetError(TargetError::Kind::exit, "exit: status 1");
    return 1.0;
  };
  const auto summary = run_experiment(cfg, flaky, WorkerPool{3, Backend::pool});
  EXPECT_EQ(summary.total, 12u);
  EXPECT_GT(summary.failed, 0u);
  EXPECT_LT(summary.failed, 12u);
  for (const auto& r : summary.records) {
    if (r.ok()) continue;
    EXPECT_NE(r.diagnostic.find("exit"), std::string::npos);
    EXPECT_GT(r.values.number("x"), 0.0);
  }
}

TEST(Engine, AllFailedHasNoBest) {
  auto cfg = griewank_config(2);
  cfg.plan.n_bayes = 4;
  const Objective broken = [](const ParameterSet&, std::size_t) -> double { return std::nan(""); };
  const auto summary = run_experiment(cfg, broken, WorkerPool{2, Backend::pool});
  EXPECT_EQ(summary.failed, summary.total);
  EXPECT_FALSE(summary.best.has_value());
  for (const auto& r : summary.records) EXPECT_NE(r.diagnostic.find("non-finite"), std::string::npos);
}

TEST(Engine, RepetitionsAreAveraged) {
  auto cfg = griewank_config(2);
  cfg.plan = {};
  cfg.plan.n_random = 4;
  cfg.repetitions = 3;
  cfg.target.kind = TargetSpec::Kind::subprocess;
  cfg.target.command = {std::string(PHS_TEST_DATA_DIR) + "/rep_plus_one.sh"};
  const auto summary = run_experiment(cfg);
  ASSERT_EQ(summary.total, 4u);
  for (const auto& r : summary.records) {
    EXPECT_EQ(r.repetition_results, (std::vector<double>{1.0, 2.0, 3.0}));
    EXPECT_EQ(r.result, 2.0);
  }
}

TEST(Engine, WritesTrialsAndSidecar) {
  const auto dir = fixture::temp_dir("engine");
  auto cfg = griewank_config(4);
  cfg.output = dir / "run";
  const auto summary = run_experiment(cfg);
  const auto loaded = load_experiment(cfg.output);
  EXPECT_TRUE(loaded.completed);
  ASSERT_EQ(loaded.records.size(), summary.records.size());
  for (std::size_t i = 0; i < loaded.records.size(); ++i) EXPECT_TRUE(loaded.records[i] == summary.records[i]);
  EXPECT_THROW(run_experiment(cfg), StorageError);
  std::filesystem::remove_all(dir);
}
