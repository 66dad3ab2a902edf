#include "cfbo/sobol.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <boost/math/special_functions/erf.hpp>

namespace cfbo {

namespace {

constexpr int kBits = 32;
constexpr double kScale = 1.0 / 4294967296.0;  // 2^-32

}  // namespace

SobolSequence::SobolSequence(std::size_t dim, bool scramble, std::uint64_t seed) : dim_(dim) {
  if (dim == 0) throw InvalidInput("Sobol dimension must be >= 1");
  if (dim > sobol_table::kMaxDimension) throw Unsupported("Sobol dimension exceeds the direction-number table");

  directions_.assign(dim * kBits, 0);
  std::vector<std::uint32_t> m(kBits);
  for (std::size_t d = 0; d < dim; ++d) {
    const std::uint32_t poly = sobol_table::kPoly[d];
    const int degree = std::bit_width(poly) - 1;
    if (degree == 0) {
      std::fill(m.begin(), m.end(), 1u);
    } else {
      const std::uint32_t* init = sobol_table::kInitial + sobol_table::kOffset[d];
      for (int j = 0; j < degree; ++j) m[j] = init[j];
      for (int j = degree; j < kBits; ++j) {
        std::uint32_t v = m[j - degree];
        std::uint32_t pow2 = 1;
        for (int k = 0; k < degree; ++k) {
          pow2 <<= 1;
          if ((poly >> (degree - 1 - k)) & 1u) v ^= pow2 * m[j - k - 1];
        }
        m[j] = v;
      }
    }
    for (int j = 0; j < kBits; ++j) directions_[d * kBits + j] = m[j] << (kBits - 1 - j);
  }

  state_.assign(dim, 0);
  shift_.assign(dim, 0);
  if (scramble) {
    Rng rng(seed);
    for (std::size_t d = 0; d < dim; ++d) {
      // Lower-triangular (MSB first) binary matrix with unit diagonal.
      std::uint32_t rows[kBits];
      for (int i = 0; i < kBits; ++i) {
        const std::uint32_t below = i == 0 ? 0u : static_cast<std::uint32_t>(rng()) & ~(0xFFFFFFFFu >> i);
        rows[i] = below | (0x80000000u >> i);
      }
      for (int j = 0; j < kBits; ++j) {
        const std::uint32_t v = directions_[d * kBits + j];
        std::uint32_t out = 0;
        for (int i = 0; i < kBits; ++i)
          if (std::popcount(rows[i] & v) & 1) out |= 0x80000000u >> i;
        directions_[d * kBits + j] = out;
      }
      shift_[d] = static_cast<std::uint32_t>(rng() >> 32);
    }
  } else {
    advance();
  }
}

void SobolSequence::advance() {
  const int c = std::countr_one(index_);
  if (c >= kBits) throw Unsupported("Sobol sequence exhausted (2^32 points)");
  for (std::size_t d = 0; d < dim_; ++d) state_[d] ^= directions_[d * kBits + c];
  ++index_;
}

Vector SobolSequence::next() {
  Vector out(static_cast<Eigen::Index>(dim_));
  for (std::size_t d = 0; d < dim_; ++d) out(static_cast<Eigen::Index>(d)) = (state_[d] ^ shift_[d]) * kScale;
  advance();
  return out;
}

Matrix SobolSequence::draw(std::size_t n) {
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < n; ++i) out.row(static_cast<Eigen::Index>(i)) = next().transpose();
  return out;
}

void SobolSequence::skip(std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) advance();
}

Matrix sobol_candidates(std::size_t n, std::size_t d, std::uint64_t seed) {
  SobolSequence seq(d, true, seed);
  return seq.draw(n);
}

double normal_quantile(double u) {
  constexpr double kEps = 1e-12;
  u = std::clamp(u, kEps, 1.0 - kEps);
  return std::sqrt(2.0) * boost::math::erf_inv(2.0 * u - 1.0);
}

}  // namespace cfbo
