// Shared helpers for the unit and acceptance tests.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "phs/store.hpp"

namespace fixture {

/// One parameter of every kind; the string values exercise CSV quoting.
inline phs::SearchSpace mixed_space() {
  using phs::ParameterSpec;
  return phs::SearchSpace::define({
      ParameterSpec::continuous("lr", 1e-5, 1.0),
      ParameterSpec::discrete("batch", {16, 32, 64, 128}),
      ParameterSpec::categorical("opt", {"sgd", "adam, beta=0.9", "say \"hi\""}),
      ParameterSpec::opaque("schedule", {"cosine", "step\n30,60", ""}),
  });
}

/// A record that is valid for `space`; about one in six has failed.
inline phs::TrialRecord random_record(const phs::SearchSpace& space, std::size_t index, std::mt19937_64& gen) {
  std::uniform_int_distribution<int> coin(0, 5);
  std::uniform_real_distribution<double> wide(-1e6, 1e6);
  phs::Rng rng(gen());
  phs::TrialRecord r;
  r.set_index = index;
  r.values = phs::sample_random(space, rng);
  for (std::size_t i = 0; i < space.size(); ++i)
    r.provenance.push_back(static_cast<phs::Provenance>(coin(gen) % 4));
  const bool failed = coin(gen) == 0;
  const int reps = 1 + coin(gen) % 3;
  if (!failed) {
    double sum = 0.0;
    for (int k = 0; k < reps; ++k) {
      // mixes magnitudes so the shortest round-trip encoding gets exercised
      const double v = wide(gen) * std::pow(10.0, coin(gen) * 3 - 9);
      r.repetition_results.push_back(v);
      sum += v;
    }
    r.result = sum / reps;
    r.status = phs::TrialStatus::ok;
  } else {
    r.status = phs::TrialStatus::failed;
    r.diagnostic = coin(gen) % 2 ? "exit code 1: \"boom\", see log\nline two" : "timeout";
    if (coin(gen) < 2) r.values = {};
  }
  r.worker_id = static_cast<std::size_t>(coin(gen));
  r.start_ts = 1'700'000'000'000'000 + static_cast<std::int64_t>(gen() % 1'000'000'000);
  r.end_ts = r.start_ts + static_cast<std::int64_t>(gen() % 10'000'000);
  return r;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  static std::random_device rd;
  auto dir = fs::temp_directory_path() / ("phs_" + tag + "_" + std::to_string(rd()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

/// trials.csv rows with the wall-clock columns (start_ts, end_ts) blanked.
inline std::vector<std::vector<std::string>> rows_without_timestamps(const std::filesystem::path& trials) {
  std::ifstream in(trials, std::ios::binary);
  std::vector<std::vector<std::string>> out;
  for (auto& row : phs::csv::read_rows(in)) {
    if (row.fields.size() > 6 && row.line > 1) row.fields[5] = row.fields[6] = "";
    out.push_back(std::move(row.fields));
  }
  return out;
}

/// Runs a shell command and returns its exit status.
inline int shell(const std::string& command) {
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace fixture
