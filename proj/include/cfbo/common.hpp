#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cfbo {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Seeded stream used everywhere randomness is consumed.
using Rng = std::mt19937_64;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user-supplied configuration (exit code 2 at the CLI).
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class PlacementInfeasible : public Error {
 public:
  using Error::Error;
};

class InvalidDistance : public Error {
 public:
  using Error::Error;
};

class InvalidCorrelation : public Error {
 public:
  using Error::Error;
};

class InvalidData : public Error {
 public:
  using Error::Error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class Unsupported : public Error {
 public:
  using Error::Error;
};

/// Factorization failure or other irrecoverable loss of precision (exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Derives an independent child seed; used to split one seed into sub-streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace cfbo
