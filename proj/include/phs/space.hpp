#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "phs/error.hpp"
#include "phs/format.hpp"
#include "phs/rng.hpp"

namespace phs {

/// A resolved parameter value: numeric kinds carry a double, categorical and
/// opaque kinds carry the literal string.
using Value = std::variant<double, std::string>;

inline std::string format_value(const Value& v) {
  if (const auto* d = std::get_if<double>(&v)) return format_double(*d);
  return std::get<std::string>(v);
}

struct Continuous {
  double lo = 0.0;
  double hi = 1.0;
};

/// Ordered numeric set, strictly increasing.
struct Discrete {
  std::vector<double> values;
};

struct Categorical {
  std::vector<std::string> values;
};

/// Literal strings forwarded verbatim to the target. Never interpreted.
struct Opaque {
  std::vector<std::string> values;
};

using ParameterKind = std::variant<Continuous, Discrete, Categorical, Opaque>;

struct ParameterSpec {
  std::string name;
  ParameterKind kind;
  bool bayes_eligible = false;

  static ParameterSpec continuous(std::string name, double lo, double hi, bool bayes = true) {
    return {std::move(name), Continuous{lo, hi}, bayes};
  }
  static ParameterSpec discrete(std::string name, std::vector<double> values) {
    return {std::move(name), Discrete{std::move(values)}, false};
  }
  static ParameterSpec categorical(std::string name, std::vector<std::string> values) {
    return {std::move(name), Categorical{std::move(values)}, false};
  }
  static ParameterSpec opaque(std::string name, std::vector<std::string> values) {
    return {std::move(name), Opaque{std::move(values)}, false};
  }

  bool is_continuous() const { return std::holds_alternative<Continuous>(kind); }
  bool is_numeric() const { return is_continuous() || std::holds_alternative<Discrete>(kind); }
  const Continuous& bounds() const { return std::get<Continuous>(kind); }

  std::string_view kind_name() const {
    static constexpr std::string_view names[] = {"continuous", "discrete", "categorical", "opaque"};
    return names[kind.index()];
  }
};

/// Name -> value assignment. Entries keep insertion order; sets produced by
/// this library are always in space order.
class ParameterSet {
 public:
  using Entry = std::pair<std::string, Value>;

  void set(std::string name, Value value) {
    for (auto& e : entries_) {
      if (e.first == name) {
        e.second = std::move(value);
        return;
      }
    }
    entries_.emplace_back(std::move(name), std::move(value));
  }

  bool contains(std::string_view name) const { return find(name) != nullptr; }

  const Value& at(std::string_view name) const {
    if (const Value* v = find(name)) return *v;
    throw ValidationError("parameter set has no value for '" + std::string(name) + "'");
  }

  double number(std::string_view name) const {
    const Value& v = at(name);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    throw ValidationError("parameter '" + std::string(name) + "' is not numeric");
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  const Value* find(std::string_view name) const {
    for (const auto& e : entries_) {
      if (e.first == name) return &e.second;
    }
    return nullptr;
  }

  std::vector<Entry> entries_;
};

namespace detail {

inline void check_spec(const ParameterSpec& spec) {
  const std::string where = "parameter '" + spec.name + "': ";
  if (spec.name.empty()) throw ValidationError("parameter name must not be empty");
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Continuous>) {
          if (!std::isfinite(k.lo) || !std::isfinite(k.hi)) throw ValidationError(where + "bounds must be finite");
          if (!(k.lo < k.hi)) throw ValidationError(where + "lower bound must be below upper bound");
        } else if constexpr (std::is_same_v<K, Discrete>) {
          if (k.values.empty()) throw ValidationError(where + "empty value set");
          for (std::size_t i = 0; i < k.values.size(); ++i) {
            if (!std::isfinite(k.values[i])) throw ValidationError(where + "discrete values must be finite");
            if (i > 0 && !(k.values[i - 1] < k.values[i]))
              throw ValidationError(where + "discrete values must be strictly increasing");
          }
        } else {
          if (k.values.empty()) throw ValidationError(where + "empty value set");
          std::unordered_set<std::string> seen;
          for (const auto& v : k.values) {
            if (!seen.insert(v).second) throw ValidationError(where + "duplicate value '" + v + "'");
          }
        }
      },
      spec.kind);
  if (spec.bayes_eligible && !spec.is_continuous())
    throw ValidationError(where + "only continuous parameters can be optimized by Bayesian optimization");
}

}  // namespace detail

/// Ordered, validated list of parameter declarations. Immutable once built.
class SearchSpace {
 public:
  /// Empty placeholder; not a valid space. Use define().
  SearchSpace() = default;

  static SearchSpace define(std::vector<ParameterSpec> specs) {
    if (specs.empty()) throw ValidationError("search space needs at least one parameter");
    std::unordered_set<std::string> names;
    for (const auto& s : specs) {
      detail::check_spec(s);
      if (!names.insert(s.name).second) throw ValidationError("duplicate parameter name '" + s.name + "'");
    }
    SearchSpace space;
    space.specs_ = std::move(specs);
    return space;
  }

  const std::vector<ParameterSpec>& specs() const { return specs_; }
  std::size_t size() const { return specs_.size(); }
  bool empty() const { return specs_.empty(); }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      if (specs_[i].name == name) return i;
    }
    return std::nullopt;
  }

  const ParameterSpec& spec(std::string_view name) const {
    if (auto i = index_of(name)) return specs_[*i];
    throw ValidationError("unknown parameter '" + std::string(name) + "'");
  }

  std::vector<std::string> bayes_eligible_names() const {
    std::vector<std::string> out;
    for (const auto& s : specs_) {
      if (s.bayes_eligible) out.push_back(s.name);
    }
    return out;
  }

 private:
  std::vector<ParameterSpec> specs_;
};

/// Checks a single value against its declaration.
inline void validate_value(const ParameterSpec& spec, const Value& value) {
  const std::string where = "parameter '" + spec.name + "': ";
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Continuous> || std::is_same_v<K, Discrete>) {
          const auto* d = std::get_if<double>(&value);
          if (d == nullptr) throw ValidationError(where + "expected a number");
          if constexpr (std::is_same_v<K, Continuous>) {
            if (!(*d >= k.lo && *d <= k.hi))
              throw ValidationError(where + "value " + format_double(*d) + " outside [" + format_double(k.lo) +
                                    ", " + format_double(k.hi) + "]");
          } else {
            if (!std::binary_search(k.values.begin(), k.values.end(), *d))
              throw ValidationError(where + "value " + format_double(*d) + " is not in the declared set");
          }
        } else {
          const auto* s = std::get_if<std::string>(&value);
          if (s == nullptr) throw ValidationError(where + "expected a string");
          if (std::find(k.values.begin(), k.values.end(), *s) == k.values.end())
            throw ValidationError(where + "value '" + *s + "' is not in the declared set");
        }
      },
      spec.kind);
}

/// Exactly one valid value per declared parameter.
inline void validate_set(const SearchSpace& space, const ParameterSet& set) {
  if (set.size() != space.size())
    throw ValidationError("parameter set has " + std::to_string(set.size()) + " values, space declares " +
                          std::to_string(space.size()));
  for (const auto& spec : space.specs()) validate_value(spec, set.at(spec.name));
}

inline Value sample_value(const ParameterSpec& spec, Rng& rng) {
  return std::visit(
      [&](const auto& k) -> Value {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Continuous>) {
          return k.lo + uniform01(rng) * (k.hi - k.lo);
        } else {
          return k.values[uniform_index(rng, k.values.size())];
        }
      },
      spec.kind);
}

/// One uniform draw per parameter, in space order.
inline ParameterSet sample_random(const SearchSpace& space, Rng& rng) {
  ParameterSet set;
  for (const auto& spec : space.specs()) set.set(spec.name, sample_value(spec, rng));
  return set;
}

/// Maps the named continuous parameters onto [0,1]. An empty name list means
/// every bayes-eligible parameter, in space order.
inline std::vector<double> normalize(const SearchSpace& space, const ParameterSet& set,
                                     const std::vector<std::string>& names = {}) {
  const auto dims = names.empty() ? space.bayes_eligible_names() : names;
  if (dims.empty()) throw ValidationError("normalize: no bayes-eligible parameters");
  std::vector<double> unit;
  unit.reserve(dims.size());
  for (const auto& name : dims) {
    const auto& spec = space.spec(name);
    if (!spec.bayes_eligible) throw ValidationError("normalize: parameter '" + name + "' is not bayes-eligible");
    const auto [lo, hi] = spec.bounds();
    unit.push_back((set.number(name) - lo) / (hi - lo));
  }
  return unit;
}

/// Inverse of normalize; writes the native values into `set`.
inline void denormalize(const SearchSpace& space, const std::vector<double>& unit, ParameterSet& set,
                        const std::vector<std::string>& names = {}) {
  const auto dims = names.empty() ? space.bayes_eligible_names() : names;
  if (dims.empty()) throw ValidationError("denormalize: no bayes-eligible parameters");
  if (dims.size() != unit.size()) throw ValidationError("denormalize: dimension mismatch");
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto& spec = space.spec(dims[i]);
    if (!spec.bayes_eligible) throw ValidationError("denormalize: parameter '" + dims[i] + "' is not bayes-eligible");
    const auto [lo, hi] = spec.bounds();
    set.set(dims[i], std::clamp(lo + unit[i] * (hi - lo), lo, hi));
  }
}

}  // namespace phs
