#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "phs/error.hpp"

namespace phs {

/// Isotropic squared-exponential kernel parameters, in unit-cube units.
struct KernelConfig {
  double length_scale = 0.2;
  double signal_variance = 1.0;
  double noise_variance = 1e-6;

  void validate() const {
    if (!(length_scale > 0.0) || !std::isfinite(length_scale))
      throw ValidationError("kernel: length scale must be positive");
    if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
      throw ValidationError("kernel: signal variance must be positive");
    if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance))
      throw ValidationError("kernel: noise variance must be nonnegative");
  }
};

/// Posterior at one point, in native result units.
struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

/// s2 * exp(-|a-b|^2 / (2 l^2))
inline double kernel_eval(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                          const KernelConfig& cfg) {
  if (a.size() != b.size()) throw ValidationError("kernel: dimension mismatch");
  const double sq = (a - b).squaredNorm();
  return cfg.signal_variance * std::exp(-sq / (2.0 * cfg.length_scale * cfg.length_scale));
}

/// Cholesky of K + noise*I fails after this many tenfold noise increases.
inline constexpr int kMaxJitterEscalations = 6;

/// The fixed length-scale grid searched by fit_gp_auto.
inline constexpr std::array<double, 4> kLengthScaleGrid{0.05, 0.1, 0.2, 0.5};

/// Fitted Gaussian-process regressor. Immutable; share freely across threads.
class GpModel {
 public:
  const Eigen::MatrixXd& inputs() const { return x_; }
  /// Training targets minus y_mean().
  const Eigen::VectorXd& centered_targets() const { return y_; }
  double y_mean() const { return y_mean_; }
  /// Effective kernel, including any escalated noise.
  const KernelConfig& kernel() const { return kernel_; }
  /// Lower Cholesky factor of K + noise*I.
  const Eigen::MatrixXd& cholesky() const { return l_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  Eigen::Index size() const { return x_.rows(); }
  Eigen::Index dim() const { return x_.cols(); }
  /// Raw training targets.
  Eigen::VectorXd targets() const { return (y_.array() + y_mean_).matrix(); }
  /// Lowest observed target (the incumbent).
  double best_observed() const { return y_.minCoeff() + y_mean_; }

 private:
  friend GpModel fit_gp(const Eigen::MatrixXd&, const Eigen::VectorXd&, KernelConfig);

  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  double y_mean_ = 0.0;
  KernelConfig kernel_;
  Eigen::MatrixXd l_;
  Eigen::VectorXd alpha_;
};

inline Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const KernelConfig& cfg) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = cfg.signal_variance;
    for (Eigen::Index j = 0; j < i; ++j) {
      k(i, j) = k(j, i) = kernel_eval(x.row(i).transpose(), x.row(j).transpose(), cfg);
    }
  }
  return k;
}

/// Fits with fixed kernel hyperparameters. Rows of `x` are unit-cube points.
/// If K + noise*I is not numerically positive definite the noise is raised
/// tenfold (from 1e-10*s2 when it starts at zero), at most six times.
inline GpModel fit_gp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, KernelConfig cfg) {
  cfg.validate();
  if (x.rows() < 1) throw ValidationError("fit_gp: need at least one observation");
  if (x.rows() != y.size()) throw ValidationError("fit_gp: inputs and targets disagree in length");
  if (x.cols() < 1) throw ValidationError("fit_gp: inputs need at least one dimension");
  if (!y.allFinite()) throw ValidationError("fit_gp: targets must be finite");
  if (!x.allFinite() || x.minCoeff() < 0.0 || x.maxCoeff() > 1.0)
    throw ValidationError("fit_gp: inputs must lie in the unit cube");

  GpModel m;
  m.x_ = x;
  m.y_mean_ = y.mean();
  m.y_ = (y.array() - m.y_mean_).matrix();

  const Eigen::MatrixXd k = kernel_matrix(x, cfg);
  const Eigen::Index n = x.rows();
  double noise = cfg.noise_variance;
  for (int attempt = 0; attempt <= kMaxJitterEscalations; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(k + noise * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) {
      cfg.noise_variance = noise;
      m.kernel_ = cfg;
      m.l_ = llt.matrixL();
      m.alpha_ = llt.solve(m.y_);
      return m;
    }
    noise = noise > 0.0 ? noise * 10.0 : 1e-10 * cfg.signal_variance;
  }
  throw Error("fit_gp: Cholesky factorization failed after jitter escalation");
}

inline Posterior predict(const GpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.dim()) throw ValidationError("predict: dimension mismatch");
  const Eigen::Index n = model.size();
  Eigen::VectorXd k_star(n);
  for (Eigen::Index i = 0; i < n; ++i) k_star(i) = kernel_eval(model.inputs().row(i).transpose(), x, model.kernel());
  const Eigen::VectorXd v = model.cholesky().triangularView<Eigen::Lower>().solve(k_star);
  Posterior p;
  p.mean = model.y_mean() + k_star.dot(model.alpha());
  p.variance = std::max(0.0, model.kernel().signal_variance - v.squaredNorm());
  return p;
}

/// log p(y | X) = -1/2 y^T alpha - sum log L_ii - n/2 log(2 pi), on centered targets.
inline double log_marginal_likelihood(const GpModel& model) {
  const double n = static_cast<double>(model.size());
  return -0.5 * model.centered_targets().dot(model.alpha()) -
         model.cholesky().diagonal().array().log().sum() - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

/// Default hyperparameters: s2 from the target variance (floored at 1e-12),
/// base noise 1e-6*s2, length scale picked from kLengthScaleGrid by maximum
/// log marginal likelihood (first wins on ties).
inline GpModel fit_gp_auto(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           std::span<const double> length_scales = kLengthScaleGrid) {
  if (y.size() < 1) throw ValidationError("fit_gp: need at least one observation");
  if (!y.allFinite()) throw ValidationError("fit_gp: targets must be finite");
  const double var = (y.array() - y.mean()).square().mean();
  KernelConfig cfg;
  cfg.signal_variance = std::max(var, 1e-12);
  cfg.noise_variance = 1e-6 * cfg.signal_variance;

  std::optional<GpModel> best;
  double best_lml = -std::numeric_limits<double>::infinity();
  std::string last_error = "no length scales given";
  for (double ell : length_scales) {
    cfg.length_scale = ell;
    try {
      GpModel m = fit_gp(x, y, cfg);
      const double lml = log_marginal_likelihood(m);
      if (!best || lml > best_lml) {
        best_lml = lml;
        best = std::move(m);
      }
    } catch (const ValidationError&) {
      throw;
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  if (!best) throw Error(last_error);
  return *std::move(best);
}

}  // namespace phs
