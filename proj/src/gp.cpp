#include "cfbo/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <ceres/ceres.h>

namespace cfbo {

namespace {

constexpr double kSqrt5 = 2.2360679774997896964;
constexpr double kLog2Pi = 1.8378770664093454836;

/// Squared scaled distances between rows of a and b.
Matrix scaled_sq_dist(const Matrix& a, const Matrix& b, const Vector& lengthscales) {
  const Vector inv = lengthscales.cwiseInverse();
  const Matrix as = a * inv.asDiagonal();
  const Matrix bs = b * inv.asDiagonal();
  Matrix d2 = (-2.0 * as * bs.transpose()).eval();
  d2.colwise() += as.rowwise().squaredNorm();
  d2.rowwise() += bs.rowwise().squaredNorm().transpose();
  return d2.cwiseMax(0.0);
}

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

double logit(double p) {
  p = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return std::log(p / (1.0 - p));
}

struct Box {
  Vector lo;
  Vector hi;
};

Box log_box(std::size_t dim, const GpFitOptions& o) {
  const auto d = static_cast<Eigen::Index>(dim);
  Box box{Vector(d + 2), Vector(d + 2)};
  box.lo.head(d).setConstant(std::log(o.min_lengthscale));
  box.hi.head(d).setConstant(std::log(o.max_lengthscale));
  box.lo(d) = std::log(o.min_signal_variance);
  box.hi(d) = std::log(o.max_signal_variance);
  box.lo(d + 1) = std::log(o.min_noise_variance);
  box.hi(d + 1) = std::log(o.max_noise_variance);
  return box;
}

KernelParams unpack(const Vector& log_theta) {
  const Eigen::Index d = log_theta.size() - 2;
  KernelParams p;
  p.lengthscales = log_theta.head(d).array().exp();
  p.signal_variance = std::exp(log_theta(d));
  p.noise_variance = std::exp(log_theta(d + 1));
  return p;
}

Vector pack(const KernelParams& p) {
  const Eigen::Index d = p.lengthscales.size();
  Vector out(d + 2);
  out.head(d) = p.lengthscales.array().log();
  out(d) = std::log(p.signal_variance);
  out(d + 1) = std::log(p.noise_variance);
  return out;
}

/// Log marginal likelihood and its gradient in log-hyperparameters.
/// Returns false when K + noise I is not positive definite.
bool lml_and_gradient(const Matrix& x, const Vector& y, const KernelParams& p, double* value, Vector* grad) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Matrix d2 = scaled_sq_dist(x, x, p.lengthscales);
  const Matrix r = d2.cwiseSqrt();
  const Matrix e = (-kSqrt5 * r).array().exp().matrix();
  Matrix k = (p.signal_variance * (1.0 + kSqrt5 * r.array() + (5.0 / 3.0) * d2.array()) * e.array()).matrix();
  Matrix a = k;
  a.diagonal().array() += p.noise_variance;

  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return false;
  const Vector alpha = llt.solve(y);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  *value = -0.5 * y.dot(alpha) - 0.5 * log_det - 0.5 * static_cast<double>(n) * kLog2Pi;
  if (!std::isfinite(*value)) return false;
  if (grad == nullptr) return true;

  const Matrix a_inv = llt.solve(Matrix::Identity(n, n));
  const Matrix w = alpha * alpha.transpose() - a_inv;
  // dk/dlog(l_i) = (5/3) s2 (1 + sqrt5 r) e^{-sqrt5 r} * diff_i^2 / l_i^2
  const Matrix g = ((5.0 / 3.0) * p.signal_variance * (1.0 + kSqrt5 * r.array()) * e.array()).matrix();
  const Matrix m = w.cwiseProduct(g);
  const Vector rowsum = m.rowwise().sum();
  const Matrix x_sq = x.cwiseProduct(x);
  const Vector cross = x.cwiseProduct(m * x).colwise().sum().transpose();
  const Vector inv_l2 = p.lengthscales.cwiseProduct(p.lengthscales).cwiseInverse();
  grad->resize(d + 2);
  grad->head(d) = (x_sq.transpose() * rowsum - cross).cwiseProduct(inv_l2);
  (*grad)(d) = 0.5 * w.cwiseProduct(k).sum();
  (*grad)(d + 1) = 0.5 * p.noise_variance * w.trace();
  return true;
}

/// -LML over unconstrained u, log-theta = lo + (hi - lo) sigmoid(u).
class NegativeLml final : public ceres::FirstOrderFunction {
 public:
  NegativeLml(const Matrix& x, const Vector& y, Box box) : x_(x), y_(y), box_(std::move(box)) {}

  bool Evaluate(const double* params, double* cost, double* gradient) const override {
    const Eigen::Index n = box_.lo.size();
    const Eigen::Map<const Vector> u(params, n);
    Vector s(n), log_theta(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      s(i) = sigmoid(u(i));
      log_theta(i) = box_.lo(i) + (box_.hi(i) - box_.lo(i)) * s(i);
    }
    double value = 0.0;
    Vector grad;
    if (!lml_and_gradient(x_, y_, unpack(log_theta), &value, gradient ? &grad : nullptr)) return false;
    *cost = -value;
    if (gradient != nullptr)
      for (Eigen::Index i = 0; i < n; ++i)
        gradient[i] = -grad(i) * (box_.hi(i) - box_.lo(i)) * s(i) * (1.0 - s(i));
    return true;
  }

  int NumParameters() const override { return static_cast<int>(box_.lo.size()); }

 private:
  const Matrix& x_;
  const Vector& y_;
  Box box_;
};

void check_inputs(const Matrix& x, const Vector& y) {
  if (x.rows() < 2) throw InvalidData("at least two observations are required");
  if (x.rows() != y.size()) throw InvalidData("input and target counts differ");
  if (!y.allFinite()) throw InvalidData("targets must be finite");
  if (!x.allFinite() || x.minCoeff() < 0.0 || x.maxCoeff() > 1.0)
    throw InvalidData("inputs must be finite and lie in the unit cube");
}

}  // namespace

double matern52(double r) { return (1.0 + kSqrt5 * r + (5.0 / 3.0) * r * r) * std::exp(-kSqrt5 * r); }

Matrix robust_cholesky(const Matrix& a, double* used_jitter) {
  double jitter = 0.0;
  for (int attempt = 0; attempt <= 7; ++attempt) {
    if (attempt > 0) jitter = 1e-10 * std::pow(10.0, attempt - 1);
    Matrix shifted = a;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() == Eigen::Success) {
      Matrix l = llt.matrixL();
      if (l.allFinite()) {
        if (used_jitter) *used_jitter = jitter;
        return l;
      }
    }
  }
  throw NumericalError("Cholesky factorization failed with jitter up to 1e-4");
}

GpModel GpModel::with_params(const Matrix& inputs, const Vector& targets, const KernelParams& params) {
  check_inputs(inputs, targets);
  if (params.lengthscales.size() != inputs.cols()) throw InvalidData("lengthscale count must match input dimension");
  GpModel model;
  model.inputs_ = inputs;
  model.targets_ = targets;
  model.params_ = params;
  model.condition();
  return model;
}

double GpModel::log_marginal_likelihood(const Matrix& inputs, const Vector& standardized, const KernelParams& params) {
  double value = 0.0;
  if (!lml_and_gradient(inputs, standardized, params, &value, nullptr))
    return -std::numeric_limits<double>::infinity();
  return value;
}

GpModel GpModel::fit(const Matrix& inputs, const Vector& targets, Rng& rng, const GpFitOptions& options) {
  check_inputs(inputs, targets);
  if (options.restarts < 1) throw InvalidConfig("gp.restarts must be >= 1");

  GpModel model;
  model.inputs_ = inputs;
  model.targets_ = targets;
  const double n = static_cast<double>(targets.size());
  model.y_mean_ = targets.mean();
  const double var = (targets.array() - model.y_mean_).square().sum() / std::max(1.0, n - 1.0);
  model.y_scale_ = var > 0.0 && std::isfinite(var) ? std::sqrt(var) : 1.0;
  model.standardized_ = (targets.array() - model.y_mean_) / model.y_scale_;

  const auto dim = static_cast<std::size_t>(inputs.cols());
  const Box box = log_box(dim, options);
  const double root_d = std::sqrt(static_cast<double>(dim));

  // Initializations are drawn serially so the stream is consumed identically
  // whatever the thread count.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vector> starts;
  for (int r = 0; r < options.restarts; ++r) {
    KernelParams init;
    init.lengthscales.resize(inputs.cols());
    for (Eigen::Index i = 0; i < inputs.cols(); ++i)
      init.lengthscales(i) = root_d * std::exp(std::log(0.1) + unit(rng) * std::log(10.0));
    init.signal_variance = std::exp(std::log(0.5) + unit(rng) * std::log(4.0));
    init.noise_variance = std::exp(std::log(1e-6) + unit(rng) * std::log(1e4));
    if (r == 0 && options.initial && options.initial->lengthscales.size() == inputs.cols()) init = *options.initial;
    Vector log_theta = pack(init).cwiseMax(box.lo).cwiseMin(box.hi);
    Vector u(log_theta.size());
    for (Eigen::Index i = 0; i < u.size(); ++i)
      u(i) = logit((log_theta(i) - box.lo(i)) / (box.hi(i) - box.lo(i)));
    starts.push_back(std::move(u));
  }

  const auto restarts = static_cast<std::size_t>(options.restarts);
  std::vector<Vector> finals(restarts);
  model.report_.initial_lml.assign(restarts, -std::numeric_limits<double>::infinity());
  model.report_.final_lml.assign(restarts, -std::numeric_limits<double>::infinity());

  auto to_params = [&](const Vector& u) {
    Vector log_theta(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i)
      log_theta(i) = box.lo(i) + (box.hi(i) - box.lo(i)) * sigmoid(u(i));
    return unpack(log_theta);
  };

#pragma omp parallel for schedule(dynamic)
  for (std::size_t r = 0; r < restarts; ++r) {
    Vector u = starts[r];
    model.report_.initial_lml[r] = log_marginal_likelihood(inputs, model.standardized_, to_params(u));
    if (std::isfinite(model.report_.initial_lml[r])) {
      ceres::GradientProblem problem(new NegativeLml(inputs, model.standardized_, box));
      ceres::GradientProblemSolver::Options opts;
      opts.logging_type = ceres::SILENT;
      opts.max_num_iterations = options.max_iterations;
      ceres::GradientProblemSolver::Summary summary;
      ceres::Solve(opts, problem, u.data(), &summary);
      model.report_.final_lml[r] = log_marginal_likelihood(inputs, model.standardized_, to_params(u));
      if (!(model.report_.final_lml[r] >= model.report_.initial_lml[r])) {
        u = starts[r];
        model.report_.final_lml[r] = model.report_.initial_lml[r];
      }
    }
    finals[r] = std::move(u);
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < restarts; ++r)
    if (model.report_.final_lml[r] > model.report_.final_lml[best]) best = r;
  if (!std::isfinite(model.report_.final_lml[best]))
    throw NumericalError("no hyperparameter initialization produced a factorizable covariance");
  model.report_.best_restart = best;
  model.params_ = to_params(finals[best]);
  model.condition();
  return model;
}

void GpModel::condition() {
  if (standardized_.size() != targets_.size()) {
    const double n = static_cast<double>(targets_.size());
    y_mean_ = targets_.mean();
    const double var = (targets_.array() - y_mean_).square().sum() / std::max(1.0, n - 1.0);
    y_scale_ = var > 0.0 && std::isfinite(var) ? std::sqrt(var) : 1.0;
    standardized_ = (targets_.array() - y_mean_) / y_scale_;
  }
  Matrix a = kernel(inputs_, inputs_);
  a.diagonal().array() += params_.noise_variance;
  chol_ = robust_cholesky(a, &jitter_);
  const Vector tmp = chol_.triangularView<Eigen::Lower>().solve(standardized_);
  alpha_ = chol_.transpose().triangularView<Eigen::Upper>().solve(tmp);
  lml_ = -0.5 * standardized_.dot(alpha_) - chol_.diagonal().array().log().sum() -
         0.5 * static_cast<double>(targets_.size()) * kLog2Pi;
}

Matrix GpModel::kernel(const Matrix& a, const Matrix& b) const {
  const Matrix d2 = scaled_sq_dist(a, b, params_.lengthscales);
  const Matrix r = d2.cwiseSqrt();
  return (params_.signal_variance * (1.0 + kSqrt5 * r.array() + (5.0 / 3.0) * d2.array()) *
          (-kSqrt5 * r.array()).exp())
      .matrix();
}

Matrix GpModel::cross_kernel(const Matrix& points) const { return kernel(inputs_, points); }

Posterior GpModel::posterior(const Vector& x) const {
  const Matrix k = cross_kernel(x.transpose());
  const Vector v = chol_.triangularView<Eigen::Lower>().solve(k.col(0));
  Posterior out;
  out.mean = y_mean_ + y_scale_ * k.col(0).dot(alpha_);
  out.variance = y_scale_ * y_scale_ * std::max(0.0, params_.signal_variance - v.squaredNorm());
  return out;
}

Vector GpModel::posterior_mean(const Matrix& points) const {
  const Matrix k = cross_kernel(points);
  return (y_mean_ + y_scale_ * (k.transpose() * alpha_).array()).matrix();
}

Matrix GpModel::posterior_covariance(const Matrix& a, const Matrix& b) const {
  const auto l = chol_.triangularView<Eigen::Lower>();
  const Matrix va = l.solve(cross_kernel(a));
  const Matrix vb = l.solve(cross_kernel(b));
  return y_scale_ * y_scale_ * (kernel(a, b) - va.transpose() * vb);
}

Matrix GpModel::sample_joint(const Matrix& points, std::size_t n_samples, Rng& rng) const {
  const auto l = chol_.triangularView<Eigen::Lower>();
  const Matrix v = l.solve(cross_kernel(points));
  Matrix cov = kernel(points, points) - v.transpose() * v;
  cov = 0.5 * (cov + cov.transpose());
  const Matrix lc = robust_cholesky(cov);
  const Vector mean = posterior_mean(points);

  const Eigen::Index m = points.rows();
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(m, static_cast<Eigen::Index>(n_samples));
  for (Eigen::Index s = 0; s < z.cols(); ++s)
    for (Eigen::Index i = 0; i < m; ++i) z(i, s) = normal(rng);
  Matrix draws = (y_scale_ * (lc * z)).transpose();
  draws.rowwise() += mean.transpose();
  return draws;
}

}  // namespace cfbo
