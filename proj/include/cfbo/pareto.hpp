#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "cfbo/common.hpp"

namespace cfbo {

/// Objective values, maximization convention.
using ObjectiveVector = std::vector<double>;

/// a >= b componentwise with at least one strict component. Throws
/// InvalidInput on a dimension mismatch.
bool dominates(const ObjectiveVector& a, const ObjectiveVector& b);

/// Indices of the nondominated points, in input order. Duplicates of a
/// nondominated point are all kept.
std::vector<std::size_t> pareto_indices(const std::vector<ObjectiveVector>& points);
std::vector<ObjectiveVector> pareto_front(const std::vector<ObjectiveVector>& points);

/// Exact 2-D hypervolume dominated by `front` above `ref`. Points are clipped
/// to the reference first. Throws Unsupported unless every vector has two entries.
double hypervolume(const std::vector<ObjectiveVector>& front, const ObjectiveVector& ref);

/// HV(front + candidates) - HV(front).
double hvi(const std::vector<ObjectiveVector>& candidates, const std::vector<ObjectiveVector>& front,
           const ObjectiveVector& ref);

struct LogHvDifference {
  double value = 0.0;
  bool flagged = false;  // hv exceeded the reference HV
};

/// log10(hv_reference - hv + 1e-12); the gap is clamped at zero and flagged
/// when hv > hv_reference.
LogHvDifference log_hv_difference(double hv_reference, double hv);

/// Bi-objective front kept as a sorted staircase for repeated HVI queries.
class Front2 {
 public:
  Front2() = default;
  Front2(const std::vector<ObjectiveVector>& points, const ObjectiveVector& ref);
  /// Raw (x, y) pairs, avoiding per-point allocations on the hot path.
  Front2(const double* x, const double* y, std::size_t n, double ref_x, double ref_y);

  double hypervolume() const { return hv_; }
  /// Improvement from adding one point.
  double hvi(double x, double y) const;
  /// Improvement from adding several points (rows of a q x 2 array).
  double hvi(const double* x, const double* y, std::size_t q) const;
  std::size_t size() const { return xs_.size(); }

 private:
  void build(std::vector<std::pair<double, double>> pts);

  double rx_ = 0.0;
  double ry_ = 0.0;
  std::vector<double> xs_;  // strictly decreasing
  std::vector<double> ys_;  // strictly increasing
  double hv_ = 0.0;
};

struct ArchiveEntry {
  Vector point;
  ObjectiveVector objectives;
  std::size_t iteration = 0;
};

/// All evaluated points with the nondominated subset cached.
class ParetoArchive {
 public:
  void add(ArchiveEntry entry);

  const std::vector<ArchiveEntry>& entries() const { return entries_; }
  /// Indices into entries() of the current nondominated set, in insertion order.
  const std::vector<std::size_t>& front_indices() const { return front_; }
  std::vector<ObjectiveVector> front() const;
  std::vector<ObjectiveVector> objectives() const;

  void set_reference(ObjectiveVector ref) { ref_ = std::move(ref); }
  const std::optional<ObjectiveVector>& reference() const { return ref_; }
  /// Hypervolume of the front against the reference; throws InvalidInput if unset.
  double hypervolume() const;

 private:
  std::vector<ArchiveEntry> entries_;
  std::vector<std::size_t> front_;
  std::optional<ObjectiveVector> ref_;
};

/// Componentwise nadir minus `margin` times the observed range. A zero range
/// falls back to max(|nadir|, 1) times the margin.
ObjectiveVector reference_point(const std::vector<ObjectiveVector>& points, double margin = 0.1);

}  // namespace cfbo
