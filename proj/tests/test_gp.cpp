#include <cmath>

#include <Eigen/LU>

#include "cfbo/gp.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cfbo;
using cfbo::testing::Gen;

namespace {

double matern_oracle(const Vector& a, const Vector& b, const KernelParams& p) {
  double r2 = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double t = (a(i) - b(i)) / p.lengthscales(i);
    r2 += t * t;
  }
  const double r = std::sqrt(r2);
  return p.signal_variance * (1.0 + std::sqrt(5.0) * r + 5.0 * r2 / 3.0) * std::exp(-std::sqrt(5.0) * r);
}

struct DenseOracle {
  double mean;
  double variance;
};

/// Textbook GP posterior through an explicit inverse.
DenseOracle dense_posterior(const Matrix& x, const Vector& y, const KernelParams& p, const Vector& q) {
  const Eigen::Index n = x.rows();
  const double mu = y.mean();
  double ss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) ss += (y(i) - mu) * (y(i) - mu);
  const double sd = ss > 0.0 ? std::sqrt(ss / static_cast<double>(n - 1)) : 1.0;
  Matrix k(n, n);
  Vector ks(n);
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    z(i) = (y(i) - mu) / sd;
    ks(i) = matern_oracle(x.row(i).transpose(), q, p);
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = matern_oracle(x.row(i).transpose(), x.row(j).transpose(), p);
    k(i, i) += p.noise_variance;
  }
  const Matrix inv = Eigen::FullPivLU<Matrix>(k).inverse();
  return {mu + sd * ks.dot(inv * z), sd * sd * (p.signal_variance - ks.dot(inv * ks))};
}

KernelParams params(Eigen::Index d, double ls, double sv, double nv) {
  KernelParams p;
  p.lengthscales = Vector::Constant(d, ls);
  p.signal_variance = sv;
  p.noise_variance = nv;
  return p;
}

}  // namespace

TEST_SUITE("gp") {
  TEST_CASE("matern 5/2 closed form") {
    CHECK(matern52(0.0) == 1.0);
    CHECK(matern52(1.0) == doctest::Approx((1.0 + std::sqrt(5.0) + 5.0 / 3.0) * std::exp(-std::sqrt(5.0))));
  }

  TEST_CASE("constant targets give a constant mean and finite variance") {
    Gen g(1);
    Matrix x(6, 2);
    for (Eigen::Index i = 0; i < 6; ++i) x.row(i) = g.cube(2).transpose();
    const Vector y = Vector::Constant(6, 3.25);
    Rng rng(2);
    const GpModel m = GpModel::fit(x, y, rng);
    for (int t = 0; t < 20; ++t) {
      const Posterior p = m.posterior(g.cube(2));
      CHECK(p.mean == doctest::Approx(3.25).epsilon(1e-9));
      CHECK(std::isfinite(p.variance));
      CHECK(p.variance >= 0.0);
    }
  }

  TEST_CASE("three-point posterior matches the explicit-inverse oracle") {
    Matrix x(3, 2);
    x << 0.1, 0.2, 0.5, 0.9, 0.8, 0.3;
    Vector y(3);
    y << 1.0, -0.5, 2.0;
    const KernelParams p = [] {
      KernelParams k;
      k.lengthscales = Vector(2);
      k.lengthscales << 0.4, 0.7;
      k.signal_variance = 1.3;
      k.noise_variance = 1e-3;
      return k;
    }();
    const GpModel m = GpModel::with_params(x, y, p);
    Gen g(4);
    for (int t = 0; t < 10; ++t) {
      const Vector q = g.cube(2);
      const DenseOracle o = dense_posterior(x, y, p, q);
      const Posterior post = m.posterior(q);
      CHECK(post.mean == doctest::Approx(o.mean).epsilon(1e-9));
      CHECK(post.variance == doctest::Approx(o.variance).epsilon(1e-9));
    }
  }

  TEST_CASE("smooth 1-D function is learned well below the prior variance") {
    auto f = [](double x) { return std::sin(6.0 * x) + 0.5 * x; };
    Matrix x(20, 1);
    Vector y(20);
    for (int i = 0; i < 20; ++i) {
      x(i, 0) = (i + 0.5) / 20.0;
      y(i) = f(x(i, 0));
    }
    Rng rng(5);
    const GpModel m = GpModel::fit(x, y, rng);
    double mse = 0.0, var = 0.0, mean = 0.0;
    const int n = 200;
    for (int i = 0; i < n; ++i) mean += f((i + 0.5) / n) / n;
    for (int i = 0; i < n; ++i) {
      const double q = (i + 0.5) / n;
      Vector v(1);
      v << q;
      mse += std::pow(m.posterior(v).mean - f(q), 2) / n;
      var += std::pow(f(q) - mean, 2) / n;
    }
    CHECK(mse < 0.01 * var);
  }

  TEST_CASE("near-noiseless model interpolates and reverts to the prior far away") {
    Gen g(6);
    Matrix x(8, 3);
    Vector y(8);
    for (Eigen::Index i = 0; i < 8; ++i) {
      x.row(i) = g.cube(3).transpose();
      y(i) = g.normal();
    }
    const GpModel m = GpModel::with_params(x, y, params(3, 0.05, 1.0, 1e-10));
    for (Eigen::Index i = 0; i < 8; ++i) {
      const Posterior p = m.posterior(x.row(i).transpose());
      CHECK(std::abs(p.mean - y(i)) < 1e-6);
      CHECK(p.variance <= m.target_scale() * m.target_scale() * (1e-10 + m.jitter()) + 1e-8);
    }
    // Every training point is many lengthscales from this corner.
    const Vector far = Vector::Constant(3, 1.0);
    bool isolated = true;
    for (Eigen::Index i = 0; i < 8; ++i) isolated &= (x.row(i).transpose() - far).norm() > 0.6;
    if (isolated) {
      const Posterior p = m.posterior(far);
      CHECK(p.mean == doctest::Approx(m.target_mean()).epsilon(1e-3));
      CHECK(p.variance == doctest::Approx(m.target_scale() * m.target_scale()).epsilon(1e-3));
    }
  }

  TEST_CASE("posterior covariance and mean agree with the pointwise posterior") {
    Gen g(7);
    Matrix x(10, 2);
    Vector y(10);
    for (Eigen::Index i = 0; i < 10; ++i) {
      x.row(i) = g.cube(2).transpose();
      y(i) = g.normal();
    }
    const GpModel m = GpModel::with_params(x, y, params(2, 0.3, 0.8, 1e-4));
    Matrix q(4, 2);
    for (Eigen::Index i = 0; i < 4; ++i) q.row(i) = g.cube(2).transpose();
    const Matrix cov = m.posterior_covariance(q, q);
    const Vector mean = m.posterior_mean(q);
    for (Eigen::Index i = 0; i < 4; ++i) {
      const Posterior p = m.posterior(q.row(i).transpose());
      CHECK(cov(i, i) == doctest::Approx(p.variance).epsilon(1e-9));
      CHECK(mean(i) == doctest::Approx(p.mean).epsilon(1e-12));
    }
    CHECK((cov - cov.transpose()).norm() < 1e-12);
  }

  TEST_CASE("joint samples: moments, duplicates, determinism") {
    Gen g(8);
    Matrix x(6, 2);
    Vector y(6);
    for (Eigen::Index i = 0; i < 6; ++i) {
      x.row(i) = g.cube(2).transpose();
      y(i) = g.normal();
    }
    const GpModel m = GpModel::with_params(x, y, params(2, 0.4, 1.0, 1e-3));
    Matrix q(3, 2);
    q.row(0) = g.cube(2).transpose();
    q.row(1) = g.cube(2).transpose();
    q.row(2) = q.row(0);
    Rng rng(9);
    const std::size_t n = 40000;
    const Matrix s = m.sample_joint(q, n, rng);
    REQUIRE(s.rows() == static_cast<Eigen::Index>(n));
    REQUIRE(s.cols() == 3);
    const Vector mean = m.posterior_mean(q);
    const Matrix cov = m.posterior_covariance(q, q);
    for (Eigen::Index j = 0; j < 2; ++j) {
      const double emp_mean = s.col(j).mean();
      const double emp_var = (s.col(j).array() - emp_mean).square().sum() / (n - 1.0);
      CHECK(std::abs(emp_mean - mean(j)) < 5.0 * std::sqrt(cov(j, j) / n));
      CHECK(std::abs(emp_var - cov(j, j)) < 0.05 * cov(j, j));
    }
    CHECK((s.col(0) - s.col(2)).cwiseAbs().maxCoeff() < 1e-3 * std::sqrt(cov(0, 0)));

    Rng a(11), b(11);
    CHECK(m.sample_joint(q, 5, a) == m.sample_joint(q, 5, b));
  }

  TEST_CASE("adding a point never increases posterior variance") {
    Gen g(12);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = g.integer(2, 8);
      Matrix x(n + 1, 2);
      Vector y(n + 1);
      for (int i = 0; i <= n; ++i) {
        x.row(i) = g.cube(2).transpose();
        y(i) = g.normal();
      }
      // Same target scale in both models so the comparison is on the latent variance.
      y(n) = y.head(n).mean();
      KernelParams p = params(2, g.uniform(0.1, 1.0), 1.0, 1e-4);
      const GpModel small = GpModel::with_params(x.topRows(n), y.head(n), p);
      const GpModel big = GpModel::with_params(x, y, p);
      for (int t = 0; t < 10; ++t) {
        const Vector q = g.cube(2);
        const double vs = small.posterior(q).variance / (small.target_scale() * small.target_scale());
        const double vb = big.posterior(q).variance / (big.target_scale() * big.target_scale());
        CHECK(vb <= vs + 1e-12);
      }
    }
  }

  TEST_CASE("input scaling round-trips") {
    Gen g(13);
    InputScaling s{Vector::Constant(3, -2.0), Vector::Constant(3, 5.0)};
    s.lower(1) = 0.1;
    s.upper(1) = 0.2;
    for (int t = 0; t < 100; ++t) {
      Vector x(3);
      for (Eigen::Index i = 0; i < 3; ++i) x(i) = g.uniform(s.lower(i), s.upper(i));
      CHECK((s.decode(s.encode(x)) - x).norm() < 1e-12);
      const Vector u = s.encode(x);
      CHECK(u.minCoeff() >= 0.0);
      CHECK(u.maxCoeff() <= 1.0);
    }
  }

  TEST_CASE("fitted likelihood is at least every initialization's") {
    Gen g(14);
    Matrix x(15, 3);
    Vector y(15);
    for (Eigen::Index i = 0; i < 15; ++i) {
      x.row(i) = g.cube(3).transpose();
      y(i) = std::cos(3.0 * x(i, 0)) + x(i, 1) * x(i, 2) + 0.01 * g.normal();
    }
    Rng rng(15);
    const GpModel m = GpModel::fit(x, y, rng);
    const FitReport& r = m.fit_report();
    REQUIRE(r.initial_lml.size() == 8);
    for (std::size_t i = 0; i < r.initial_lml.size(); ++i) {
      CHECK(r.final_lml[i] >= r.initial_lml[i]);
      CHECK(r.final_lml[r.best_restart] >= r.final_lml[i]);
    }
    CHECK(m.log_marginal_likelihood() == doctest::Approx(r.final_lml[r.best_restart]).epsilon(1e-6));
  }

  TEST_CASE("fit is deterministic for a fixed stream") {
    Gen g(16);
    Matrix x(10, 2);
    Vector y(10);
    for (Eigen::Index i = 0; i < 10; ++i) {
      x.row(i) = g.cube(2).transpose();
      y(i) = g.normal();
    }
    Rng a(3), b(3);
    const GpModel ma = GpModel::fit(x, y, a);
    const GpModel mb = GpModel::fit(x, y, b);
    CHECK(ma.params().lengthscales == mb.params().lengthscales);
    CHECK(ma.params().noise_variance == mb.params().noise_variance);
  }

  TEST_CASE("invalid data is rejected") {
    Rng rng(1);
    Matrix x1(1, 2);
    x1 << 0.5, 0.5;
    CHECK_THROWS_AS(GpModel::fit(x1, Vector::Constant(1, 1.0), rng), InvalidData);
    Matrix x(3, 2);
    x << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
    Vector y(3);
    y << 1.0, std::nan(""), 0.0;
    CHECK_THROWS_AS(GpModel::fit(x, y, rng), InvalidData);
    y(1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(GpModel::fit(x, y, rng), InvalidData);
    CHECK_THROWS_AS(GpModel::fit(x, Vector::Zero(2), rng), InvalidData);
    x(0, 0) = 1.5;
    CHECK_THROWS_AS(GpModel::fit(x, Vector::Zero(3), rng), InvalidData);
  }

  TEST_CASE("robust cholesky escalates jitter on a singular matrix") {
    Matrix a = Matrix::Ones(4, 4);
    double used = -1.0;
    const Matrix l = robust_cholesky(a, &used);
    CHECK(used > 0.0);
    CHECK(used <= 1e-4);
    CHECK((l * l.transpose() - a).norm() < 1e-3);
    Matrix neg = -Matrix::Identity(3, 3);
    CHECK_THROWS_AS(robust_cholesky(neg), NumericalError);
  }
}
