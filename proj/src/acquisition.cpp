#include "cfbo/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

#include "cfbo/sobol.hpp"

namespace cfbo {

void AcquisitionConfig::validate() const {
  if (n_mc_samples < 16) throw InvalidConfig("acquisition.n_mc_samples must be >= 16");
  if (batch_size < 1) throw InvalidConfig("acquisition.batch_size must be >= 1");
  if (n_restarts < 1) throw InvalidConfig("acquisition.n_restarts must be >= 1");
  if (raw_candidates < n_restarts) throw InvalidConfig("acquisition.raw_candidates must be >= n_restarts");
  if (max_evals_per_restart < 0) throw InvalidConfig("acquisition.max_evals_per_restart must be >= 0");
  if (!(initial_step > 0.0 && initial_step <= 1.0)) throw InvalidConfig("acquisition.initial_step must lie in (0, 1]");
  if (!(min_step > 0.0 && min_step <= initial_step))
    throw InvalidConfig("acquisition.min_step must lie in (0, initial_step]");
}

BaseSamples::BaseSamples(std::size_t n_samples, std::size_t objectives, std::size_t n_observed,
                         std::size_t max_batch, std::uint64_t seed)
    : n_samples_(n_samples), objectives_(objectives), n_observed_(n_observed), max_batch_(max_batch) {
  if (n_samples == 0 || objectives == 0 || max_batch == 0) throw InvalidInput("base samples need a positive shape");
  const std::size_t dim = objectives * (n_observed + max_batch);
  if (dim <= sobol_table::kMaxDimension) {
    z_ = sobol_candidates(n_samples, dim, seed).unaryExpr([](double u) { return normal_quantile(u); });
  } else {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    z_.resize(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < z_.rows(); ++i)
      for (Eigen::Index j = 0; j < z_.cols(); ++j) z_(i, j) = normal(rng);
  }
}

Matrix psd_cholesky(const Matrix& a) {
  const Eigen::Index n = a.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 1e-12 * std::abs(a(j, j))) || d <= 0.0) continue;
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
  }
  return l;
}

namespace {

struct CandidateStats {
  Vector mean;       // standardized
  Matrix cov;        // standardized, q x q
  Matrix cross_obs;  // standardized, n_obs x q
};

CandidateStats candidate_stats(const GpModel& model, const Matrix& x_cand, const Matrix* x_obs, const Matrix* v_obs) {
  const Matrix k_tc = model.cross_kernel(x_cand);
  const Matrix v_c = model.chol().triangularView<Eigen::Lower>().solve(k_tc);
  CandidateStats s;
  s.mean = k_tc.transpose() * model.alpha();
  s.cov = model.kernel(x_cand, x_cand) - v_c.transpose() * v_c;
  s.cov = 0.5 * (s.cov + s.cov.transpose());
  if (x_obs != nullptr) s.cross_obs = model.kernel(*x_obs, x_cand) - v_obs->transpose() * v_c;
  return s;
}

void require_two_objectives(std::size_t models, const BaseSamples& base) {
  if (models != 2) throw Unsupported("hypervolume acquisitions support two objectives only");
  if (base.objectives() != models) throw InvalidInput("base samples were drawn for a different objective count");
}

McValue summarize(const std::vector<double>& values) {
  McValue out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std_error = values.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return out;
}

void check_batch(const Matrix& x_cand, const BaseSamples& base) {
  if (x_cand.rows() < 1 || static_cast<std::size_t>(x_cand.rows()) > base.max_batch())
    throw InvalidInput("candidate batch size exceeds the base-sample layout");
}

}  // namespace

QehviAcquisition::QehviAcquisition(const std::vector<GpModel>& models, const std::vector<ObjectiveVector>& front,
                                   const ObjectiveVector& ref, const BaseSamples& base)
    : models_(&models), base_(&base), front_(front, ref) {
  require_two_objectives(models.size(), base);
}

McValue QehviAcquisition::estimate(const Matrix& x_cand) const {
  check_batch(x_cand, *base_);
  const Eigen::Index q = x_cand.rows();
  const auto n = static_cast<Eigen::Index>(base_->n_samples());
  std::vector<Matrix> draws(2);
  for (std::size_t t = 0; t < 2; ++t) {
    const GpModel& m = (*models_)[t];
    const CandidateStats s = candidate_stats(m, x_cand, nullptr, nullptr);
    const Matrix lc = psd_cholesky(s.cov);
    Matrix f = base_->candidates(t).leftCols(q) * lc.transpose();
    f.rowwise() += s.mean.transpose();
    draws[t] = (m.target_mean() + m.target_scale() * f.array()).matrix();
  }
  std::vector<double> gains(static_cast<std::size_t>(n));
  std::vector<double> x(static_cast<std::size_t>(q)), y(static_cast<std::size_t>(q));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < q; ++j) {
      x[j] = draws[0](i, j);
      y[j] = draws[1](i, j);
    }
    gains[static_cast<std::size_t>(i)] = front_.hvi(x.data(), y.data(), static_cast<std::size_t>(q));
  }
  return summarize(gains);
}

NehviAcquisition::NehviAcquisition(const std::vector<GpModel>& models, const Matrix& x_observed,
                                   const ObjectiveVector& ref, const BaseSamples& base)
    : models_(&models), base_(&base), x_obs_(x_observed), ref_(ref) {
  require_two_objectives(models.size(), base);
  if (ref.size() != 2) throw Unsupported("hypervolume acquisitions support two objectives only");
  if (static_cast<std::size_t>(x_observed.rows()) != base.n_observed())
    throw InvalidInput("base samples were drawn for a different number of observed designs");

  const auto n = static_cast<Eigen::Index>(base.n_samples());
  const Eigen::Index n_obs = x_observed.rows();
  std::vector<Matrix> draws(2);
  per_.resize(2);
  for (std::size_t t = 0; t < 2; ++t) {
    const GpModel& m = models[t];
    PerObjective& p = per_[t];
    const Matrix k_to = m.cross_kernel(x_observed);
    p.v_obs = m.chol().triangularView<Eigen::Lower>().solve(k_to);
    p.mean_obs = k_to.transpose() * m.alpha();
    Matrix cov = m.kernel(x_observed, x_observed) - p.v_obs.transpose() * p.v_obs;
    cov = 0.5 * (cov + cov.transpose());
    p.chol_obs = robust_cholesky(cov);
    Matrix f = base.observed(t) * p.chol_obs.transpose();
    f.rowwise() += p.mean_obs.transpose();
    draws[t] = (m.target_mean() + m.target_scale() * f.array()).matrix();
  }
  fronts_.reserve(static_cast<std::size_t>(n));
  std::vector<double> x(static_cast<std::size_t>(n_obs)), y(static_cast<std::size_t>(n_obs));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n_obs; ++j) {
      x[j] = draws[0](i, j);
      y[j] = draws[1](i, j);
    }
    fronts_.emplace_back(x.data(), y.data(), x.size(), ref[0], ref[1]);
  }
}

McValue NehviAcquisition::estimate(const Matrix& x_cand) const {
  check_batch(x_cand, *base_);
  const Eigen::Index q = x_cand.rows();
  const auto n = static_cast<Eigen::Index>(base_->n_samples());
  std::vector<Matrix> draws(2);
  for (std::size_t t = 0; t < 2; ++t) {
    const GpModel& m = (*models_)[t];
    const PerObjective& p = per_[t];
    const CandidateStats s = candidate_stats(m, x_cand, &x_obs_, &p.v_obs);
    const Matrix c = p.chol_obs.triangularView<Eigen::Lower>().solve(s.cross_obs);
    Matrix cond = s.cov - c.transpose() * c;
    cond = 0.5 * (cond + cond.transpose());
    const Matrix lc = psd_cholesky(cond);
    Matrix f = base_->observed(t) * c + base_->candidates(t).leftCols(q) * lc.transpose();
    f.rowwise() += s.mean.transpose();
    draws[t] = (m.target_mean() + m.target_scale() * f.array()).matrix();
  }
  std::vector<double> gains(static_cast<std::size_t>(n));
  std::vector<double> x(static_cast<std::size_t>(q)), y(static_cast<std::size_t>(q));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < q; ++j) {
      x[j] = draws[0](i, j);
      y[j] = draws[1](i, j);
    }
    gains[static_cast<std::size_t>(i)] = fronts_[static_cast<std::size_t>(i)].hvi(x.data(), y.data(), x.size());
  }
  return summarize(gains);
}

McValue NehviAcquisition::estimate_dense(const Matrix& x_cand) const {
  check_batch(x_cand, *base_);
  const Eigen::Index q = x_cand.rows();
  const Eigen::Index n_obs = x_obs_.rows();
  const auto n = static_cast<Eigen::Index>(base_->n_samples());
  Matrix joint(n_obs + q, x_obs_.cols());
  joint << x_obs_, x_cand;

  std::vector<Matrix> draws(2);
  for (std::size_t t = 0; t < 2; ++t) {
    const GpModel& m = (*models_)[t];
    const Matrix k = m.cross_kernel(joint);
    const Matrix v = m.chol().triangularView<Eigen::Lower>().solve(k);
    Matrix cov = m.kernel(joint, joint) - v.transpose() * v;
    cov = 0.5 * (cov + cov.transpose());
    const Matrix l = robust_cholesky(cov);
    Matrix z(n, n_obs + q);
    z << base_->observed(t), base_->candidates(t).leftCols(q);
    Matrix f = z * l.transpose();
    f.rowwise() += (k.transpose() * m.alpha()).transpose();
    draws[t] = (m.target_mean() + m.target_scale() * f.array()).matrix();
  }
  std::vector<double> gains(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<ObjectiveVector> observed, cands;
    for (Eigen::Index j = 0; j < n_obs; ++j) observed.push_back({draws[0](i, j), draws[1](i, j)});
    for (Eigen::Index j = n_obs; j < n_obs + q; ++j) cands.push_back({draws[0](i, j), draws[1](i, j)});
    gains[static_cast<std::size_t>(i)] = hvi(cands, pareto_front(observed), ref_);
  }
  return summarize(gains);
}

McValue qehvi(const std::vector<GpModel>& models, const Matrix& x_cand, const std::vector<ObjectiveVector>& front,
              const ObjectiveVector& ref, const AcquisitionConfig& cfg, Rng& rng) {
  cfg.validate();
  const BaseSamples base(static_cast<std::size_t>(cfg.n_mc_samples), models.size(), 0,
                         static_cast<std::size_t>(x_cand.rows()), rng());
  return QehviAcquisition(models, front, ref, base).estimate(x_cand);
}

McValue nehvi(const std::vector<GpModel>& models, const Matrix& x_cand, const Matrix& x_observed,
              const ObjectiveVector& ref, const AcquisitionConfig& cfg, Rng& rng) {
  cfg.validate();
  const BaseSamples base(static_cast<std::size_t>(cfg.n_mc_samples), models.size(),
                         static_cast<std::size_t>(x_observed.rows()), static_cast<std::size_t>(x_cand.rows()), rng());
  return NehviAcquisition(models, x_observed, ref, base).estimate(x_cand);
}

double ehvi_deterministic(const std::vector<GpModel>& models, const Matrix& x_cand,
                          const std::vector<ObjectiveVector>& front, const ObjectiveVector& ref) {
  std::vector<Vector> means;
  for (const auto& m : models) means.push_back(m.posterior_mean(x_cand));
  std::vector<ObjectiveVector> cands(static_cast<std::size_t>(x_cand.rows()), ObjectiveVector(models.size()));
  for (std::size_t j = 0; j < cands.size(); ++j)
    for (std::size_t t = 0; t < models.size(); ++t) cands[j][t] = means[t](static_cast<Eigen::Index>(j));
  return hvi(cands, front, ref);
}

namespace {

struct Candidate {
  Vector x;
  double value = -std::numeric_limits<double>::infinity();
};

/// Higher value first, then lexicographically smaller point.
bool better(const Candidate& a, const Candidate& b) {
  if (a.value != b.value) return a.value > b.value;
  return std::lexicographical_compare(a.x.data(), a.x.data() + a.x.size(), b.x.data(), b.x.data() + b.x.size());
}

Matrix as_batch(const Vector& flat, std::size_t q, std::size_t d) {
  Matrix out(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < q; ++j)
    out.row(static_cast<Eigen::Index>(j)) =
        flat.segment(static_cast<Eigen::Index>(j * d), static_cast<Eigen::Index>(d)).transpose();
  return out;
}

double safe_eval(const AcquisitionFn& acq, const Matrix& batch) {
  const double v = acq(batch);
  return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
}

Candidate pattern_search(const AcquisitionFn& acq, Candidate start, std::size_t q, std::size_t d,
                         const AcquisitionConfig& cfg, std::uint64_t seed, std::size_t* evals_out) {
  const auto n = static_cast<Eigen::Index>(q * d);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Candidate cur = std::move(start);
  double step = cfg.initial_step;
  std::size_t evals = 0;
  const auto budget = static_cast<std::size_t>(cfg.max_evals_per_restart);
  const Eigen::Index patience = std::min<Eigen::Index>(n, 32);
  Eigen::Index coord = 0;
  Eigen::Index fails = 0;

  // Tries x + s*dir, then keeps doubling along it while it improves.
  auto try_direction = [&](const Vector& dir) {
    for (double sign : {1.0, -1.0}) {
      if (evals >= budget) return false;
      Vector y = (cur.x + sign * step * dir).cwiseMax(0.0).cwiseMin(1.0);
      if (y == cur.x) continue;
      double fy = safe_eval(acq, as_batch(y, q, d));
      ++evals;
      if (!(fy > cur.value)) continue;
      double scale = 2.0;
      while (evals < budget) {
        Vector z = (cur.x + sign * scale * step * dir).cwiseMax(0.0).cwiseMin(1.0);
        if (z == y) break;
        const double fz = safe_eval(acq, as_batch(z, q, d));
        ++evals;
        if (!(fz > fy)) break;
        y = std::move(z);
        fy = fz;
        scale *= 2.0;
      }
      cur.x = std::move(y);
      cur.value = fy;
      return true;
    }
    return false;
  };

  while (evals < budget && step >= cfg.min_step) {
    bool improved = false;
    if (n > 1) {
      Vector g(n);
      for (Eigen::Index i = 0; i < n; ++i) g(i) = normal(rng);
      g /= g.cwiseAbs().maxCoeff();
      improved = try_direction(g);
    }
    if (!improved) improved = try_direction(Vector::Unit(n, coord));
    coord = (coord + 1) % n;
    if (improved) {
      fails = 0;
    } else if (++fails >= patience) {
      step *= 0.5;
      fails = 0;
    }
  }
  *evals_out = evals;
  return cur;
}

}  // namespace

OptimizeResult optimize_acquisition(const AcquisitionFn& acq, std::size_t dim, const AcquisitionConfig& cfg, Rng& rng) {
  cfg.validate();
  if (dim == 0) throw InvalidInput("acquisition dimension must be >= 1");
  const auto q = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t flat_dim = q * dim;
  const auto n_probes = static_cast<std::size_t>(cfg.raw_candidates);
  const std::uint64_t seed = rng();

  Matrix probes;
  if (flat_dim <= sobol_table::kMaxDimension) {
    probes = sobol_candidates(n_probes, flat_dim, seed);
  } else {
    Rng probe_rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    probes.resize(static_cast<Eigen::Index>(n_probes), static_cast<Eigen::Index>(flat_dim));
    for (Eigen::Index i = 0; i < probes.rows(); ++i)
      for (Eigen::Index j = 0; j < probes.cols(); ++j) probes(i, j) = unit(probe_rng);
  }

  std::vector<Candidate> scored(n_probes);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t i = 0; i < n_probes; ++i) {
    try {
      scored[i].x = probes.row(static_cast<Eigen::Index>(i)).transpose();
      scored[i].value = safe_eval(acq, as_batch(scored[i].x, q, dim));
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  std::sort(scored.begin(), scored.end(), better);

  const auto restarts = std::min<std::size_t>(static_cast<std::size_t>(cfg.n_restarts), n_probes);
  std::vector<Candidate> finals(restarts);
  std::vector<std::size_t> evals(restarts, 0);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t r = 0; r < restarts; ++r) {
    try {
      finals[r] = pattern_search(acq, scored[r], q, dim, cfg, derive_seed(seed, r), &evals[r]);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  Candidate best = scored.front();
  for (const auto& c : finals)
    if (better(c, best)) best = c;

  OptimizeResult out;
  out.points = as_batch(best.x, q, dim);
  out.value = best.value;
  out.best_probe_value = scored.front().value;
  out.evaluations = n_probes + std::accumulate(evals.begin(), evals.end(), std::size_t{0});
  return out;
}

}  // namespace cfbo
