#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <limits>
#include <optional>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <mutex>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "phs/error.hpp"
#include "phs/format.hpp"
#include "phs/space.hpp"

namespace phs {

enum class Provenance { explicit_value, random, bayes, random_fallback };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::explicit_value: return "explicit";
    case Provenance::random: return "random";
    case Provenance::bayes: return "bayes";
    case Provenance::random_fallback: return "random-fallback";
  }
  return "?";
}

inline std::optional<Provenance> parse_provenance(std::string_view s) {
  if (s == "explicit") return Provenance::explicit_value;
  if (s == "random") return Provenance::random;
  if (s == "bayes") return Provenance::bayes;
  if (s == "random-fallback") return Provenance::random_fallback;
  return std::nullopt;
}

enum class TrialStatus { ok, failed };

/// One finished (or failed) evaluation of one planned set.
struct TrialRecord {
  std::size_t set_index = 0;
  /// Resolved values, in space order.
  ParameterSet values;
  /// Per-parameter provenance, aligned with `values`.
  std::vector<Provenance> provenance;
  std::vector<double> repetition_results;
  /// Mean of repetition_results; NaN for failed records without results.
  double result = std::numeric_limits<double>::quiet_NaN();
  TrialStatus status = TrialStatus::failed;
  std::string diagnostic;
  std::size_t worker_id = 0;
  /// UTC microseconds since the epoch.
  std::int64_t start_ts = 0;
  std::int64_t end_ts = 0;

  bool ok() const { return status == TrialStatus::ok; }

  /// At least one parameter came from a Bayesian-optimization proposal.
  bool has_bayes() const { return std::find(provenance.begin(), provenance.end(), Provenance::bayes) != provenance.end(); }

  /// Bitwise comparison of doubles, so NaN results compare equal to themselves.
  friend bool operator==(const TrialRecord& a, const TrialRecord& b) {
    auto same = [](double x, double y) { return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y); };
    if (a.repetition_results.size() != b.repetition_results.size()) return false;
    for (std::size_t i = 0; i < a.repetition_results.size(); ++i) {
      if (!same(a.repetition_results[i], b.repetition_results[i])) return false;
    }
    return a.set_index == b.set_index && a.values == b.values && a.provenance == b.provenance &&
           same(a.result, b.result) && a.status == b.status && a.diagnostic == b.diagnostic &&
           a.worker_id == b.worker_id && a.start_ts == b.start_ts && a.end_ts == b.end_ts;
  }
};

/// Throws ValidationError unless the record is consistent with `space`.
inline void validate_record(const TrialRecord& r, const SearchSpace& space) {
  if (r.start_ts > r.end_ts) throw ValidationError("trial record: start after end");
  if (r.ok() && !std::isfinite(r.result)) throw ValidationError("trial record: ok status needs a finite result");
  if (r.provenance.size() != space.size()) throw ValidationError("trial record: provenance does not cover the space");
  if (r.values.size() == 0 && !r.ok()) return;
  if (r.values.size() != space.size()) throw ValidationError("trial record: values do not cover the space");
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (r.values.entries()[i].first != space.specs()[i].name)
      throw ValidationError("trial record: values are not in space order");
    validate_value(space.specs()[i], r.values.entries()[i].second);
  }
}

/// Lowest result among ok records; ties go to the lowest set_index.
inline const TrialRecord& best_trial(std::span<const TrialRecord> records) {
  const TrialRecord* best = nullptr;
  for (const auto& r : records) {
    if (!r.ok()) continue;
    if (best == nullptr || r.result < best->result || (r.result == best->result && r.set_index < best->set_index))
      best = &r;
  }
  if (best == nullptr) throw Error("best_trial: no successful trials");
  return *best;
}

// ---------------------------------------------------------------------------
// trials.csv
//
// set_index,status,result,repetition_results,worker_id,start_ts,end_ts,
// param:<name>... ,prov:<name>... ,diagnostic
//
// Doubles use the shortest round-trip decimal; repetition results are joined
// with ';'. Fields are quoted (RFC 4180) when they contain ',', '"', CR or LF.
// Every row ends with '\n'; a final row without one is a truncated write.
// ---------------------------------------------------------------------------

namespace csv {

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

struct Row {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

/// Splits a CSV stream into rows. Tracks the starting line of each row.
inline std::vector<Row> read_rows(std::istream& in) {
  std::vector<Row> rows;
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    Row row;
    row.line = line;
    std::string field;
    bool in_quotes = false;
    bool terminated = false;
    while (i < text.size()) {
      const char c = text[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field += '"';
            i += 2;
            continue;
          }
          in_quotes = false;
          ++i;
          continue;
        }
        if (c == '\n') ++line;
        field += c;
        ++i;
        continue;
      }
      if (c == '"' && field.empty()) {
        in_quotes = true;
        ++i;
      } else if (c == ',') {
        row.fields.push_back(std::move(field));
        field.clear();
        ++i;
      } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
        ++i;
      } else if (c == '\n') {
        ++i;
        ++line;
        terminated = true;
        break;
      } else {
        field += c;
        ++i;
      }
    }
    if (in_quotes) throw StorageError("line " + std::to_string(row.line) + ": unterminated quoted field");
    if (!terminated) throw StorageError("line " + std::to_string(row.line) + ": truncated row (no line terminator)");
    row.fields.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace csv

inline std::vector<std::string> trial_columns(const SearchSpace& space) {
  std::vector<std::string> cols = {"set_index", "status",   "result", "repetition_results",
                                   "worker_id", "start_ts", "end_ts"};
  for (const auto& s : space.specs()) cols.push_back("param:" + s.name);
  for (const auto& s : space.specs()) cols.push_back("prov:" + s.name);
  cols.push_back("diagnostic");
  return cols;
}

inline std::string trials_header(const SearchSpace& space) {
  std::string out;
  const auto cols = trial_columns(space);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ',';
    out += csv::quote(cols[i]);
  }
  out += '\n';
  return out;
}

inline std::string format_trial_row(const TrialRecord& r, const SearchSpace& space) {
  std::vector<std::string> fields = {std::to_string(r.set_index), r.ok() ? "ok" : "failed", format_double(r.result)};
  std::string reps;
  for (std::size_t i = 0; i < r.repetition_results.size(); ++i) {
    if (i) reps += ';';
    reps += format_double(r.repetition_results[i]);
  }
  fields.push_back(std::move(reps));
  fields.push_back(std::to_string(r.worker_id));
  fields.push_back(std::to_string(r.start_ts));
  fields.push_back(std::to_string(r.end_ts));
  // failed records may carry no values when resolution itself failed
  for (const auto& spec : space.specs())
    fields.push_back(r.values.contains(spec.name) ? format_value(r.values.at(spec.name)) : std::string());
  for (auto p : r.provenance) fields.push_back(std::string(to_string(p)));
  fields.push_back(r.diagnostic);

  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv::quote(fields[i]);
  }
  out += '\n';
  return out;
}

namespace detail {

template <typename Int>
Int parse_int(std::string_view s, std::size_t line, std::string_view column) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw StorageError("line " + std::to_string(line) + ": column '" + std::string(column) + "': bad integer '" +
                       std::string(s) + "'");
  return v;
}

inline double parse_real(std::string_view s, std::size_t line, std::string_view column) {
  auto v = parse_double(s);
  if (!v || s != trim(s))
    throw StorageError("line " + std::to_string(line) + ": column '" + std::string(column) + "': bad number '" +
                       std::string(s) + "'");
  return *v;
}

}  // namespace detail

/// Parses trials.csv written for `space`. Errors name the offending line.
inline std::vector<TrialRecord> read_trials_csv(std::istream& in, const SearchSpace& space) {
  const auto rows = csv::read_rows(in);
  if (rows.empty()) throw StorageError("line 1: missing header");
  const auto cols = trial_columns(space);
  if (rows.front().fields != cols) throw StorageError("line 1: header does not match the experiment's space");

  const std::size_t n = space.size();
  std::vector<TrialRecord> out;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& row = rows[k];
    const auto& f = row.fields;
    if (f.size() != cols.size())
      throw StorageError("line " + std::to_string(row.line) + ": expected " + std::to_string(cols.size()) +
                         " fields, found " + std::to_string(f.size()));
    TrialRecord r;
    r.set_index = detail::parse_int<std::size_t>(f[0], row.line, cols[0]);
    if (f[1] == "ok") {
      r.status = TrialStatus::ok;
    } else if (f[1] == "failed") {
      r.status = TrialStatus::failed;
    } else {
      throw StorageError("line " + std::to_string(row.line) + ": bad status '" + f[1] + "'");
    }
    r.result = detail::parse_real(f[2], row.line, cols[2]);
    if (!f[3].empty()) {
      std::string_view reps = f[3];
      while (true) {
        const auto cut = reps.find(';');
        r.repetition_results.push_back(detail::parse_real(reps.substr(0, cut), row.line, cols[3]));
        if (cut == std::string_view::npos) break;
        reps.remove_prefix(cut + 1);
      }
    }
    r.worker_id = detail::parse_int<std::size_t>(f[4], row.line, cols[4]);
    r.start_ts = detail::parse_int<std::int64_t>(f[5], row.line, cols[5]);
    r.end_ts = detail::parse_int<std::int64_t>(f[6], row.line, cols[6]);
    const bool no_values = r.status == TrialStatus::failed &&
                           std::all_of(f.begin() + 7, f.begin() + 7 + static_cast<std::ptrdiff_t>(n),
                                       [](const std::string& v) { return v.empty(); });
    for (std::size_t i = 0; i < n; ++i) {
      const auto& spec = space.specs()[i];
      const auto& text = f[7 + i];
      if (!no_values) {
        r.values.set(spec.name, spec.is_numeric() ? Value{detail::parse_real(text, row.line, cols[7 + i])}
                                                  : Value{text});
      }
      auto p = parse_provenance(f[7 + n + i]);
      if (!p) throw StorageError("line " + std::to_string(row.line) + ": bad provenance '" + f[7 + n + i] + "'");
      r.provenance.push_back(*p);
    }
    r.diagnostic = f.back();
    try {
      validate_record(r, space);
    } catch (const ValidationError& e) {
      throw StorageError("line " + std::to_string(row.line) + ": " + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<TrialRecord> load_trials(const std::filesystem::path& path, const SearchSpace& space) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot open " + path.string());
  return read_trials_csv(in, space);
}

/// Append-only trial log. Appends are serialized and flushed before they
/// return; snapshots copy a pointer to an immutable vector and never wait for
/// file I/O.
class TrialStore {
 public:
  using Snapshot = std::shared_ptr<const std::vector<TrialRecord>>;

  /// In-memory store.
  explicit TrialStore(SearchSpace space) : space_(std::move(space)), records_(std::make_shared<std::vector<TrialRecord>>()) {}

  /// File-backed store; creates `path` with a header. Refuses to overwrite.
  TrialStore(SearchSpace space, const std::filesystem::path& path) : TrialStore(std::move(space)) {
    if (std::filesystem::exists(path)) throw StorageError(path.string() + " already exists");
    file_.open(path, std::ios::binary | std::ios::out);
    if (!file_) throw StorageError("cannot create " + path.string());
    file_ << trials_header(space_);
    file_.flush();
    if (!file_) throw StorageError("write failed: " + path.string());
  }

  TrialStore(const TrialStore&) = delete;
  TrialStore& operator=(const TrialStore&) = delete;

  const SearchSpace& space() const { return space_; }

  void append(TrialRecord record) {
    validate_record(record, space_);
    std::lock_guard write_lock(write_mutex_);
    if (!indices_.insert(record.set_index).second)
      throw StorageError("duplicate set_index " + std::to_string(record.set_index));
    if (file_.is_open()) {
      file_ << format_trial_row(record, space_);
      file_.flush();
      if (!file_) {
        indices_.erase(record.set_index);
        throw StorageError("write failed while appending set " + std::to_string(record.set_index));
      }
    }
    auto next = std::make_shared<std::vector<TrialRecord>>(*snapshot());
    next->push_back(std::move(record));
    std::lock_guard ptr_lock(ptr_mutex_);
    records_ = std::move(next);
  }

  /// All records durable at call time, in completion order.
  Snapshot snapshot() const {
    std::lock_guard ptr_lock(ptr_mutex_);
    return records_;
  }

 private:
  SearchSpace space_;
  std::ofstream file_;
  std::unordered_set<std::size_t> indices_;
  std::mutex write_mutex_;
  mutable std::mutex ptr_mutex_;
  Snapshot records_;
};

}  // namespace phs
