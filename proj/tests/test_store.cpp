#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "fixtures.hpp"
#include "phs/experiment.hpp"

using namespace phs;
namespace fs = std::filesystem;

namespace {


TrialRecord ok_record(std::size_t index, double result, const SearchSpace& space) {
  TrialRecord r;
  r.set_index = index;
  r.values.set("x", 0.5);
  r.provenance.assign(space.size(), Provenance::random);
  r.repetition_results = {result};
  r.result = result;
  r.status = TrialStatus::ok;
  return r;
}

SearchSpace unit_space() { return SearchSpace::define({ParameterSpec::continuous("x", 0, 1)}); }

}  // namespace

TEST(Csv, QuotesOnlyWhenNeeded) {
  EXPECT_EQ(csv::quote("plain"), "plain");
  EXPECT_EQ(csv::quote("a,b"), "\"a,b\"");
  EXPECT_EQ(csv::quote("say \"x\""), "\"say \"\"x\"\"\"");
  EXPECT_EQ(csv::quote("two\nlines"), "\"two\nlines\"");
}

TEST(Csv, HeaderLayout) {
  const auto space = fixture::mixed_space();
  EXPECT_EQ(trials_header(space),
            "set_index,status,result,repetition_results,worker_id,start_ts,end_ts,"
            "param:lr,param:batch,param:opt,param:schedule,prov:lr,prov:batch,prov:opt,prov:schedule,diagnostic\n");
}

TEST(Store, RoundTripPreservesEveryField) {
  const auto space = fixture::mixed_space();
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto dir = fixture::temp_dir("roundtrip");
    const auto path = dir / kTrialsFile;
    std::vector<TrialRecord> written;
    {
      TrialStore store(space, path);
      const std::size_t n = gen() % 12;
      for (std::size_t i = 0; i < n; ++i) {
        written.push_back(fixture::random_record(space, i * 3 + 1, gen));
        store.append(written.back());
      }
    }
    const auto loaded = load_trials(path, space);
    ASSERT_EQ(loaded.size(), written.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) EXPECT_TRUE(loaded[i] == written[i]) << "record " << i;
    fs::remove_all(dir);
  }
}

TEST(Store, RejectsDuplicateIndex) {
  const auto space = unit_space();
  TrialStore store(space);
  store.append(ok_record(4, 1.0, space));
  EXPECT_THROW(store.append(ok_record(4, 2.0, space)), StorageError);
  EXPECT_EQ(store.snapshot()->size(), 1u);
}

TEST(Store, RejectsInvalidRecord) {
  const auto space = unit_space();
  TrialStore store(space);
  auto r = ok_record(0, 1.0, space);
  r.values.set("x", 2.0);
  EXPECT_THROW(store.append(r), ValidationError);
  r = ok_record(0, std::numeric_limits<double>::quiet_NaN(), space);
  EXPECT_THROW(store.append(r), ValidationError);
}

TEST(Store, RefusesToOverwrite) {
  const auto dir = fixture::temp_dir("overwrite");
  { TrialStore store(unit_space(), dir / kTrialsFile); }
  EXPECT_THROW(TrialStore(unit_space(), dir / kTrialsFile), StorageError);
  fs::remove_all(dir);
}

TEST(Store, ConcurrentAppendsAndSnapshots) {
  const auto space = fixture::mixed_space();
  const auto dir = fixture::temp_dir("stress");
  const auto path = dir / kTrialsFile;
  constexpr std::size_t writers = 6, per_writer = 50;
  std::vector<TrialRecord> all;
  std::mt19937_64 gen(5);
  for (std::size_t i = 0; i < writers * per_writer; ++i) all.push_back(fixture::random_record(space, i, gen));
  {
    TrialStore store(space, path);
    std::atomic<bool> done{false};
    std::atomic<int> bad_snapshots{0};
    std::thread reader([&] {
      std::size_t last = 0;
      while (!done) {
        const auto snap = store.snapshot();
        if (snap->size() < last) ++bad_snapshots;
        last = snap->size();
      }
    });
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < writers; ++w) {
      threads.emplace_back([&, w] {
        for (std::size_t k = 0; k < per_writer; ++k) {
          const auto& r = all[w * per_writer + k];
          const auto before = store.snapshot();
          store.append(r);
          const auto after = store.snapshot();
          // an earlier snapshot is a prefix of a later one
          bool prefix = after->size() > before->size();
          for (std::size_t i = 0; prefix && i < before->size(); ++i)
            prefix = (*before)[i].set_index == (*after)[i].set_index;
          if (!prefix) ++bad_snapshots;
        }
      });
    }
    for (auto& t : threads) t.join();
    done = true;
    reader.join();
    EXPECT_EQ(bad_snapshots.load(), 0);
    EXPECT_EQ(store.snapshot()->size(), writers * per_writer);
  }
  auto loaded = load_trials(path, space);
  ASSERT_EQ(loaded.size(), writers * per_writer);
  std::sort(loaded.begin(), loaded.end(), [](const auto& a, const auto& b) { return a.set_index < b.set_index; });
  for (std::size_t i = 0; i < loaded.size(); ++i) EXPECT_TRUE(loaded[i] == all[i]) << "record " << i;
  fs::remove_all(dir);
}

TEST(Store, EmptyFileWithHeaderIsEmpty) {
  std::istringstream in(trials_header(fixture::mixed_space()));
  EXPECT_TRUE(read_trials_csv(in, fixture::mixed_space()).empty());
}

TEST(Store, TruncatedRowNamesTheLine) {
  const auto space = unit_space();
  std::string text = trials_header(space) + format_trial_row(ok_record(0, 1.0, space), space) +
                     format_trial_row(ok_record(1, 2.0, space), space);
  text.resize(text.size() - 5);
  std::istringstream in(text);
  try {
    read_trials_csv(in, space);
    FAIL() << "truncated file accepted";
  } catch (const StorageError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Store, MalformedFieldsAreReported) {
  const auto space = unit_space();
  const std::string header = trials_header(space);
  for (const std::string row : {"0,ok,abc,,0,0,0,0.5,random,\n", "0,done,1,1,0,0,0,0.5,random,\n",
                                "0,ok,1,1,0,0,0,0.5,guessed,\n", "0,ok,1,1,0,0,0,0.5\n", "0,ok,1,1,0,5,1,0.5,random,\n"}) {
    std::istringstream in(header + row);
    EXPECT_THROW(read_trials_csv(in, space), StorageError) << row;
  }
  std::istringstream wrong_header("set_index,status\n");
  EXPECT_THROW(read_trials_csv(wrong_header, space), StorageError);
}

TEST(BestTrial, LowestResultAndTieBreak) {
  const auto space = unit_space();
  std::vector<TrialRecord> records = {ok_record(5, 2.0, space), ok_record(3, 1.0, space), ok_record(1, 1.0, space)};
  TrialRecord failed;
  failed.set_index = 0;
  failed.provenance = {Provenance::random};
  records.push_back(failed);
  EXPECT_EQ(best_trial(records).set_index, 1u);
  EXPECT_THROW(best_trial(std::span<const TrialRecord>(records.data() + 3, 1)), Error);
}

TEST(Sidecar, CompletedMarker) {
  const auto dir = fixture::temp_dir("sidecar");
  ExperimentConfig cfg;
  cfg.space = unit_space();
  cfg.plan.n_random = 2;
  cfg.target.name = "sphere";
  cfg.seed = 3;
  { TrialStore store(cfg.space, dir / kTrialsFile); }
  write_sidecar(dir, cfg, false);
  EXPECT_FALSE(load_experiment(dir).completed);
  write_sidecar(dir, cfg, true);
  const auto loaded = load_experiment(dir);
  EXPECT_TRUE(loaded.completed);
  EXPECT_EQ(loaded.config.seed, 3u);
  EXPECT_EQ(loaded.config.plan.n_random, 2u);
  EXPECT_FALSE(fs::exists(dir / (std::string(kSidecarFile) + ".tmp")));
  EXPECT_NE(fixture::read_file(dir / kSidecarFile).find("\"schema_version\""), std::string::npos);
  fs::remove_all(dir);
}
