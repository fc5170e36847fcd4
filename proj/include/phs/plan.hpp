#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "phs/error.hpp"
#include "phs/space.hpp"

namespace phs {

struct ExplicitTag {
  Value value;
  friend bool operator==(const ExplicitTag&, const ExplicitTag&) = default;
};
struct RandomTag {
  friend bool operator==(const RandomTag&, const RandomTag&) = default;
};
struct BayesTag {
  friend bool operator==(const BayesTag&, const BayesTag&) = default;
};

/// How one parameter of one planned set gets its value.
using StrategyTag = std::variant<ExplicitTag, RandomTag, BayesTag>;

/// Partial explicit assignment; parameters left out are drawn at random.
using ExplicitRow = std::map<std::string, Value>;

struct PlanEntry {
  std::size_t set_index = 0;
  /// One tag per space parameter, in space order.
  std::vector<std::pair<std::string, StrategyTag>> assignments;

  const StrategyTag& tag(std::string_view name) const {
    for (const auto& [n, t] : assignments) {
      if (n == name) return t;
    }
    throw ValidationError("plan entry has no assignment for '" + std::string(name) + "'");
  }

  bool has_bayes() const {
    return std::any_of(assignments.begin(), assignments.end(),
                       [](const auto& a) { return std::holds_alternative<BayesTag>(a.second); });
  }

  /// Names tagged bayes, in space order.
  std::vector<std::string> bayes_names() const {
    std::vector<std::string> out;
    for (const auto& [n, t] : assignments) {
      if (std::holds_alternative<BayesTag>(t)) out.push_back(n);
    }
    return out;
  }

  friend bool operator==(const PlanEntry&, const PlanEntry&) = default;
};

struct SearchPlan {
  std::vector<PlanEntry> entries;

  std::size_t size() const { return entries.size(); }
  friend bool operator==(const SearchPlan&, const SearchPlan&) = default;
};

/// Materializes the schedule: explicit rows first, then `n_random` all-random
/// sets, then `n_bayes` sets with bayes on `bayes_params` and random elsewhere.
/// An empty `bayes_params` selects every bayes-eligible parameter.
inline SearchPlan build_plan(const SearchSpace& space, const std::vector<ExplicitRow>& explicit_rows,
                             std::size_t n_random, std::size_t n_bayes,
                             const std::vector<std::string>& bayes_params = {}) {
  if (space.empty()) throw ValidationError("build_plan: empty search space");
  if (explicit_rows.size() + n_random + n_bayes == 0) throw ValidationError("build_plan: plan would be empty");

  std::vector<std::string> bayes = bayes_params;
  for (const auto& name : bayes) {
    if (!space.spec(name).bayes_eligible)
      throw ValidationError("build_plan: parameter '" + name + "' is not eligible for Bayesian optimization");
  }
  if (bayes.empty() && n_bayes > 0) {
    bayes = space.bayes_eligible_names();
    if (bayes.empty()) throw ValidationError("build_plan: bayes sets requested but no parameter is bayes-eligible");
  }

  SearchPlan plan;
  std::size_t index = 0;

  for (const auto& row : explicit_rows) {
    for (const auto& [name, value] : row) validate_value(space.spec(name), value);
    PlanEntry entry{index++, {}};
    for (const auto& spec : space.specs()) {
      auto it = row.find(spec.name);
      entry.assignments.emplace_back(spec.name, it == row.end() ? StrategyTag{RandomTag{}}
                                                                : StrategyTag{ExplicitTag{it->second}});
    }
    plan.entries.push_back(std::move(entry));
  }

  for (std::size_t i = 0; i < n_random; ++i) {
    PlanEntry entry{index++, {}};
    for (const auto& spec : space.specs()) entry.assignments.emplace_back(spec.name, RandomTag{});
    plan.entries.push_back(std::move(entry));
  }

  for (std::size_t i = 0; i < n_bayes; ++i) {
    PlanEntry entry{index++, {}};
    for (const auto& spec : space.specs()) {
      const bool is_bayes = std::find(bayes.begin(), bayes.end(), spec.name) != bayes.end();
      entry.assignments.emplace_back(spec.name, is_bayes ? StrategyTag{BayesTag{}} : StrategyTag{RandomTag{}});
    }
    plan.entries.push_back(std::move(entry));
  }
  return plan;
}

}  // namespace phs
