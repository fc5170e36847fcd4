#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "phs/error.hpp"
#include "phs/rng.hpp"
#include "phs/surrogate.hpp"

namespace phs {

struct AcquisitionConfig {
  /// Exploration margin in result units. Unset means max(0.01*|f_best|, 1e-4).
  std::optional<double> xi;
  std::size_t n_candidates = 2000;
  /// Candidates closer than this (unit-cube distance) to an in-flight point are skipped.
  double pending_radius = 0.02;

  void validate() const {
    if (xi && !(*xi >= 0.0)) throw ValidationError("acquisition: xi must be nonnegative");
    if (n_candidates < 1) throw ValidationError("acquisition: n_candidates must be at least 1");
    if (!(pending_radius >= 0.0)) throw ValidationError("acquisition: pending_radius must be nonnegative");
  }

  double effective_xi(double f_best) const { return xi ? *xi : std::max(0.01 * std::abs(f_best), 1e-4); }
};

struct Proposal {
  Eigen::VectorXd point;
  double ei_value = 0.0;
  /// Ordinal of the winning candidate.
  std::size_t candidate = 0;
};

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Expected improvement for minimization, with improvement f_best - mu - xi.
inline double expected_improvement(double mu, double variance, double f_best, double xi) {
  const double improvement = f_best - mu - xi;
  const double sigma = std::sqrt(std::max(variance, 0.0));
  if (sigma == 0.0) return std::max(improvement, 0.0);
  const double z = improvement / sigma;
  return std::max(improvement * normal_cdf(z) + sigma * normal_pdf(z), 0.0);
}

/// Refits `model` with every pending point imputed at the incumbent value
/// (constant liar), reusing the model's kernel hyperparameters.
inline GpModel with_constant_liars(const GpModel& model, const std::vector<Eigen::VectorXd>& pending) {
  if (pending.empty()) return model;
  const Eigen::Index n = model.size();
  const Eigen::Index total = n + static_cast<Eigen::Index>(pending.size());
  Eigen::MatrixXd x(total, model.dim());
  Eigen::VectorXd y(total);
  x.topRows(n) = model.inputs();
  y.head(n) = model.targets();
  const double lie = model.best_observed();
  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (pending[i].size() != model.dim()) throw ValidationError("propose: pending point dimension mismatch");
    x.row(n + static_cast<Eigen::Index>(i)) = pending[i].transpose().cwiseMax(0.0).cwiseMin(1.0);
    y(n + static_cast<Eigen::Index>(i)) = lie;
  }
  return fit_gp(x, y, model.kernel());
}

/// Picks the next query point. Scores `n_candidates` seeded uniform points of
/// the unit cube by EI under the constant-liar model. Candidates within
/// `pending_radius` of a pending point are skipped unless every candidate is.
/// Ties go to the lowest candidate ordinal.
inline Proposal propose(const GpModel& model, const std::vector<Eigen::VectorXd>& pending,
                        const AcquisitionConfig& cfg, Rng& rng) {
  cfg.validate();
  const Eigen::Index d = model.dim();
  Eigen::MatrixXd candidates(static_cast<Eigen::Index>(cfg.n_candidates), d);
  for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) candidates(i, j) = uniform01(rng);
  }

  const GpModel scoring = with_constant_liars(model, pending);
  const double f_best = model.best_observed();
  const double xi = cfg.effective_xi(f_best);

  auto near_pending = [&](const Eigen::VectorXd& c) {
    for (const auto& p : pending) {
      if ((c - p).norm() < cfg.pending_radius) return true;
    }
    return false;
  };

  std::vector<char> eligible(cfg.n_candidates, 1);
  bool any_eligible = false;
  for (std::size_t i = 0; i < cfg.n_candidates; ++i) {
    eligible[i] = near_pending(candidates.row(static_cast<Eigen::Index>(i)).transpose()) ? 0 : 1;
    any_eligible = any_eligible || eligible[i];
  }

  Proposal best;
  best.ei_value = -1.0;
  for (std::size_t i = 0; i < cfg.n_candidates; ++i) {
    if (any_eligible && !eligible[i]) continue;
    const Eigen::VectorXd c = candidates.row(static_cast<Eigen::Index>(i)).transpose();
    const Posterior post = predict(scoring, c);
    const double ei = expected_improvement(post.mean, post.variance, f_best, xi);
    if (ei > best.ei_value) {
      best.ei_value = ei;
      best.point = c;
      best.candidate = i;
    }
  }
  return best;
}

}  // namespace phs
