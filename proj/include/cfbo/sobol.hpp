#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cfbo/common.hpp"

namespace cfbo {

namespace sobol_table {
extern const std::size_t kMaxDimension;
extern const std::uint32_t kPoly[];
extern const std::uint32_t kOffset[];
extern const std::uint32_t kInitial[];
}  // namespace sobol_table

/// 32-bit Sobol sequence (Joe-Kuo direction numbers), Gray-code ordering.
///
/// Unscrambled, the all-zero first point is skipped so the sequence starts at
/// (0.5, ..., 0.5). Scrambled (random linear matrix plus digital shift), index
/// zero is kept since it is no longer the origin.
class SobolSequence {
 public:
  SobolSequence(std::size_t dim, bool scramble = false, std::uint64_t seed = 0);

  std::size_t dim() const { return dim_; }
  Vector next();
  /// n x dim matrix of the next n points.
  Matrix draw(std::size_t n);
  void skip(std::size_t n);

 private:
  void advance();

  std::size_t dim_;
  std::vector<std::uint32_t> directions_;  // dim x 32, row-major
  std::vector<std::uint32_t> state_;
  std::vector<std::uint32_t> shift_;
  std::uint64_t index_ = 0;
  bool fresh_ = true;
};

/// First n points of a scrambled sequence in [0,1)^d.
Matrix sobol_candidates(std::size_t n, std::size_t d, std::uint64_t seed);

/// Standard normal quantile via the inverse error function; u is clamped
/// into (0, 1) first.
double normal_quantile(double u);

}  // namespace cfbo
