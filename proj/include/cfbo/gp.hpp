#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "cfbo/common.hpp"

namespace cfbo {

/// Matern-5/2 ARD hyperparameters on the standardized target scale.
struct KernelParams {
  Vector lengthscales;
  double signal_variance = 1.0;
  double noise_variance = 1e-6;
};

struct GpFitOptions {
  int restarts = 8;
  int max_iterations = 60;
  double min_lengthscale = 1e-2;
  double max_lengthscale = 1e3;
  double min_signal_variance = 1e-6;
  double max_signal_variance = 1e2;
  double min_noise_variance = 1e-8;
  double max_noise_variance = 1.0;
  /// Replaces the first sampled initialization when set (warm start).
  std::optional<KernelParams> initial;
};

/// Min-max scaling between a box and the unit cube.
struct InputScaling {
  Vector lower;
  Vector upper;

  Vector encode(const Vector& x) const { return (x - lower).cwiseQuotient(upper - lower); }
  Vector decode(const Vector& u) const { return lower + u.cwiseProduct(upper - lower); }
};

double matern52(double r);

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

struct FitReport {
  std::vector<double> initial_lml;
  std::vector<double> final_lml;
  std::size_t best_restart = 0;
};

/// Exact GP regression on inputs in [0, 1]^d with standardized targets.
class GpModel {
 public:
  /// Maximizes the log marginal likelihood from `options.restarts` log-space
  /// initializations. Throws InvalidData on non-finite targets or fewer than
  /// two points, NumericalError if no initialization can be factorized.
  static GpModel fit(const Matrix& inputs, const Vector& targets, Rng& rng, const GpFitOptions& options = {});

  /// Conditions on the data with fixed hyperparameters.
  static GpModel with_params(const Matrix& inputs, const Vector& targets, const KernelParams& params);

  /// Log marginal likelihood of standardized targets; -inf if K + noise I never factors.
  static double log_marginal_likelihood(const Matrix& inputs, const Vector& standardized, const KernelParams& params);

  Posterior posterior(const Vector& x) const;
  /// Posterior covariance between two point sets (rows), on the original scale.
  Matrix posterior_covariance(const Matrix& a, const Matrix& b) const;
  Vector posterior_mean(const Matrix& points) const;

  /// n_samples x points.rows() joint posterior draws on the original scale.
  Matrix sample_joint(const Matrix& points, std::size_t n_samples, Rng& rng) const;

  /// Standardized-scale kernel between `points` rows and the training inputs.
  Matrix cross_kernel(const Matrix& points) const;
  Matrix kernel(const Matrix& a, const Matrix& b) const;

  const KernelParams& params() const { return params_; }
  const Matrix& inputs() const { return inputs_; }
  const Vector& targets() const { return targets_; }
  double target_mean() const { return y_mean_; }
  double target_scale() const { return y_scale_; }
  /// Lower Cholesky factor of K + (noise + jitter) I.
  const Matrix& chol() const { return chol_; }
  /// (K + noise I)^{-1} y on the standardized scale.
  const Vector& alpha() const { return alpha_; }
  double jitter() const { return jitter_; }
  double log_marginal_likelihood() const { return lml_; }
  const FitReport& fit_report() const { return report_; }
  std::size_t dim() const { return static_cast<std::size_t>(inputs_.cols()); }

 private:
  void condition();

  Matrix inputs_;
  Vector targets_;
  Vector standardized_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  KernelParams params_;
  Matrix chol_;
  Vector alpha_;
  double jitter_ = 0.0;
  double lml_ = 0.0;
  FitReport report_;
};

/// Lower Cholesky factor of a + jitter I, escalating jitter 1e-10 -> 1e-4
/// (x10 per retry) after a jitter-free attempt. Returns the jitter used via
/// `used_jitter`; throws NumericalError when every level fails.
Matrix robust_cholesky(const Matrix& a, double* used_jitter = nullptr);

}  // namespace cfbo
