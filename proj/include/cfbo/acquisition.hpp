#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "cfbo/common.hpp"
#include "cfbo/gp.hpp"
#include "cfbo/pareto.hpp"

namespace cfbo {

struct AcquisitionConfig {
  int n_mc_samples = 128;
  int batch_size = 1;
  int n_restarts = 10;
  int raw_candidates = 512;
  /// Pattern-search evaluations allowed per restart.
  int max_evals_per_restart = 400;
  double initial_step = 0.1;
  double min_step = 1e-4;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig naming the offending field.
  void validate() const;
};

/// Frozen standard-normal base samples: scrambled Sobol points pushed through
/// the normal quantile. Column layout is fixed per (objective, slot) so that a
/// batch of q candidates reuses the draws of its first q - 1 members.
class BaseSamples {
 public:
  BaseSamples(std::size_t n_samples, std::size_t objectives, std::size_t n_observed, std::size_t max_batch,
              std::uint64_t seed);

  std::size_t n_samples() const { return n_samples_; }
  std::size_t objectives() const { return objectives_; }
  std::size_t n_observed() const { return n_observed_; }
  std::size_t max_batch() const { return max_batch_; }

  /// n_samples x n_observed block for objective t.
  auto observed(std::size_t t) const {
    return z_.middleCols(static_cast<Eigen::Index>(t * stride()), static_cast<Eigen::Index>(n_observed_));
  }
  /// n_samples x max_batch block for objective t.
  auto candidates(std::size_t t) const {
    return z_.middleCols(static_cast<Eigen::Index>(t * stride() + n_observed_), static_cast<Eigen::Index>(max_batch_));
  }

 private:
  std::size_t stride() const { return n_observed_ + max_batch_; }

  std::size_t n_samples_;
  std::size_t objectives_;
  std::size_t n_observed_;
  std::size_t max_batch_;
  Matrix z_;
};

struct McValue {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Lower factor L with L L^T = a for symmetric positive semi-definite a;
/// pivots that fall to zero leave their column empty instead of failing.
Matrix psd_cholesky(const Matrix& a);

/// MC batch EHVI against a fixed front.
class QehviAcquisition {
 public:
  QehviAcquisition(const std::vector<GpModel>& models, const std::vector<ObjectiveVector>& front,
                   const ObjectiveVector& ref, const BaseSamples& base);

  /// x_cand rows are the q candidates.
  McValue estimate(const Matrix& x_cand) const;
  double operator()(const Matrix& x_cand) const { return estimate(x_cand).mean; }

 private:
  const std::vector<GpModel>* models_;
  const BaseSamples* base_;
  Front2 front_;
};

/// MC noisy EHVI: each draw is joint over the observed designs and the
/// candidates, and its improvement is measured against the front of its own
/// values at the observed designs.
///
/// Candidate draws are conditioned on cached draws at the observed designs,
/// so one evaluation costs a q x q factorization instead of (n + q) x (n + q).
class NehviAcquisition {
 public:
  /// Throws NumericalError if the posterior at the observed designs cannot be factorized.
  NehviAcquisition(const std::vector<GpModel>& models, const Matrix& x_observed, const ObjectiveVector& ref,
                   const BaseSamples& base);

  McValue estimate(const Matrix& x_cand) const;
  double operator()(const Matrix& x_cand) const { return estimate(x_cand).mean; }

  /// Reference path: factorizes the full joint covariance for every call.
  McValue estimate_dense(const Matrix& x_cand) const;

  const std::vector<Front2>& draw_fronts() const { return fronts_; }

 private:
  struct PerObjective {
    Matrix v_obs;     // L_train^{-1} K(train, X_obs)
    Vector mean_obs;  // standardized
    Matrix chol_obs;  // factor of the standardized posterior covariance at X_obs
  };

  const std::vector<GpModel>* models_;
  const BaseSamples* base_;
  Matrix x_obs_;
  ObjectiveVector ref_;
  std::vector<PerObjective> per_;
  std::vector<Front2> fronts_;  // one per draw
};

/// Convenience wrappers drawing fresh base samples from `rng`.
McValue qehvi(const std::vector<GpModel>& models, const Matrix& x_cand, const std::vector<ObjectiveVector>& front,
              const ObjectiveVector& ref, const AcquisitionConfig& cfg, Rng& rng);
McValue nehvi(const std::vector<GpModel>& models, const Matrix& x_cand, const Matrix& x_observed,
              const ObjectiveVector& ref, const AcquisitionConfig& cfg, Rng& rng);

/// Zero-variance reduction of EHVI: HVI of the posterior means.
double ehvi_deterministic(const std::vector<GpModel>& models, const Matrix& x_cand,
                          const std::vector<ObjectiveVector>& front, const ObjectiveVector& ref);

using AcquisitionFn = std::function<double(const Matrix&)>;

struct OptimizeResult {
  Matrix points;  // q x d
  double value = 0.0;
  double best_probe_value = 0.0;
  std::size_t evaluations = 0;
};

/// Multi-start pattern search in [0,1]^{q x d}. Probes are scrambled Sobol
/// batches; the best `n_restarts` seed local searches that alternate random
/// full-dimensional and cyclic coordinate polls, halving the step after a run
/// of failures. Ties in the final reduction go to the lexicographically
/// smallest batch.
OptimizeResult optimize_acquisition(const AcquisitionFn& acq, std::size_t dim, const AcquisitionConfig& cfg, Rng& rng);

}  // namespace cfbo
