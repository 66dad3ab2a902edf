#include <algorithm>
#include <cmath>

#include "cfbo/sobol.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cfbo;

namespace {

/// Exact 2-D star discrepancy over the grid of point coordinates.
double star_discrepancy(const Matrix& p) {
  const Eigen::Index n = p.rows();
  std::vector<double> xs{1.0}, ys{1.0};
  for (Eigen::Index i = 0; i < n; ++i) {
    xs.push_back(p(i, 0));
    ys.push_back(p(i, 1));
  }
  double worst = 0.0;
  for (double x : xs)
    for (double y : ys) {
      int open = 0, closed = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        open += p(i, 0) < x && p(i, 1) < y;
        closed += p(i, 0) <= x && p(i, 1) <= y;
      }
      const double vol = x * y;
      worst = std::max({worst, vol - static_cast<double>(open) / n, static_cast<double>(closed) / n - vol});
    }
  return worst;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return 0.5 * (v[(v.size() - 1) / 2] + v[v.size() / 2]);
}

}  // namespace

TEST_SUITE("sobol") {
  TEST_CASE("first unscrambled points match the reference generator") {
    SobolSequence s(5);
    const Matrix x = s.draw(7);
    Matrix expect(7, 5);
    expect << 0.5, 0.5, 0.5, 0.5, 0.5,
              0.75, 0.25, 0.25, 0.25, 0.75,
              0.25, 0.75, 0.75, 0.75, 0.25,
              0.375, 0.375, 0.625, 0.875, 0.375,
              0.875, 0.875, 0.125, 0.375, 0.875,
              0.625, 0.125, 0.875, 0.625, 0.625,
              0.125, 0.625, 0.375, 0.125, 0.125;
    CHECK(x == expect);
  }

  TEST_CASE("deep indices in high dimension match the reference generator") {
    SobolSequence s(1200);
    const Matrix x = s.draw(1023);
    const std::vector<int> cols{0, 7, 99, 511, 1199};
    const std::vector<std::pair<int, std::vector<double>>> rows{
        {36, {0.921875, 0.796875, 0.171875, 0.046875, 0.921875}},
        {499, {0.439453125, 0.775390625, 0.861328125, 0.689453125, 0.212890625}},
        {1022, {0.0009765625, 0.6181640625, 0.5302734375, 0.6142578125, 0.9501953125}},
    };
    for (const auto& [row, values] : rows)
      for (std::size_t j = 0; j < cols.size(); ++j) CHECK(x(row, cols[j]) == values[j]);
  }

  TEST_CASE("single unscrambled draw is the cube centre") {
    SobolSequence s(17);
    CHECK(s.next() == Vector::Constant(17, 0.5));
  }

  TEST_CASE("skip equals drawing and discarding") {
    SobolSequence a(6, true, 4), b(6, true, 4);
    a.skip(37);
    b.draw(37);
    CHECK(a.next() == b.next());
  }

  TEST_CASE("coordinates lie in [0, 1)") {
    for (bool scramble : {false, true}) {
      SobolSequence s(64, scramble, 9);
      const Matrix x = s.draw(4096);
      CHECK(x.minCoeff() >= 0.0);
      CHECK(x.maxCoeff() < 1.0);
    }
  }

  TEST_CASE("scrambled points: deterministic per seed, distinct across seeds") {
    CHECK(sobol_candidates(64, 8, 3) == sobol_candidates(64, 8, 3));
    CHECK(sobol_candidates(64, 8, 3) != sobol_candidates(64, 8, 4));
  }

  TEST_CASE("scrambled power-of-two blocks stay balanced per coordinate") {
    const Matrix x = sobol_candidates(256, 10, 11);
    for (Eigen::Index j = 0; j < 10; ++j) {
      int low = 0;
      for (Eigen::Index i = 0; i < 256; ++i) low += x(i, j) < 0.5;
      CHECK(low == 128);
    }
  }

  TEST_CASE("scrambled Sobol has lower median star discrepancy than iid uniform") {
    std::vector<double> sob, iid;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      sob.push_back(star_discrepancy(sobol_candidates(256, 2, seed)));
      Rng rng(seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      Matrix p(256, 2);
      for (Eigen::Index i = 0; i < 256; ++i)
        for (Eigen::Index j = 0; j < 2; ++j) p(i, j) = u(rng);
      iid.push_back(star_discrepancy(p));
    }
    CHECK(median(sob) < median(iid));
  }

  TEST_CASE("normal quantile") {
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(normal_quantile(0.0) == doctest::Approx(-7.034484).epsilon(1e-5));
    CHECK(std::isfinite(normal_quantile(1.0)));
  }
}
