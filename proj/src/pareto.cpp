#include "cfbo/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cfbo {

bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
  if (a.size() != b.size()) throw InvalidInput("objective vectors differ in dimension");
  bool strict = false;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t] < b[t]) return false;
    if (a[t] > b[t]) strict = true;
  }
  return strict;
}

std::vector<std::size_t> pareto_indices(const std::vector<ObjectiveVector>& points) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < points.size() && !dominated; ++j)
      dominated = j != i && dominates(points[j], points[i]);
    if (!dominated) out.push_back(i);
  }
  return out;
}

std::vector<ObjectiveVector> pareto_front(const std::vector<ObjectiveVector>& points) {
  std::vector<ObjectiveVector> out;
  for (std::size_t i : pareto_indices(points)) out.push_back(points[i]);
  return out;
}

namespace {

void require_2d(const ObjectiveVector& v) {
  if (v.size() != 2) throw Unsupported("hypervolume is implemented for two objectives only");
}

}  // namespace

Front2::Front2(const std::vector<ObjectiveVector>& points, const ObjectiveVector& ref) {
  require_2d(ref);
  rx_ = ref[0];
  ry_ = ref[1];
  std::vector<std::pair<double, double>> pts;
  pts.reserve(points.size());
  for (const auto& p : points) {
    require_2d(p);
    pts.emplace_back(p[0], p[1]);
  }
  build(std::move(pts));
}

Front2::Front2(const double* x, const double* y, std::size_t n, double ref_x, double ref_y) : rx_(ref_x), ry_(ref_y) {
  std::vector<std::pair<double, double>> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i] = {x[i], y[i]};
  build(std::move(pts));
}

void Front2::build(std::vector<std::pair<double, double>> pts) {
  // clip, drop points with no area, then keep the staircase
  std::erase_if(pts, [&](const auto& p) { return !(p.first > rx_ && p.second > ry_); });
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second > b.second;
  });
  xs_.clear();
  ys_.clear();
  hv_ = 0.0;
  double best_y = ry_;
  for (const auto& [x, y] : pts) {
    if (y <= best_y) continue;
    xs_.push_back(x);
    ys_.push_back(y);
    best_y = y;
  }
  for (std::size_t i = 0; i < xs_.size(); ++i) {
    const double next_x = i + 1 < xs_.size() ? xs_[i + 1] : rx_;
    hv_ += (xs_[i] - next_x) * (ys_[i] - ry_);
  }
}

double Front2::hvi(double x, double y) const {
  x = std::max(x, rx_);
  y = std::max(y, ry_);
  if (x <= rx_ || y <= ry_) return 0.0;
  // h(t) = height of the front over (t - dt, t]; segments from the right.
  double gain = 0.0;
  double right = x;
  double height = ry_;
  std::size_t i = 0;
  while (i < xs_.size() && xs_[i] >= x) {
    height = ys_[i];
    ++i;
  }
  while (right > rx_) {
    const double left = i < xs_.size() ? std::max(xs_[i], rx_) : rx_;
    if (y > height) gain += (right - left) * (y - height);
    if (i >= xs_.size()) break;
    height = ys_[i];
    right = left;
    ++i;
    if (height >= y) break;
  }
  return gain;
}

double Front2::hvi(const double* x, const double* y, std::size_t q) const {
  if (q == 1) return hvi(x[0], y[0]);
  std::vector<double> ax(xs_), ay(ys_);
  ax.insert(ax.end(), x, x + q);
  ay.insert(ay.end(), y, y + q);
  const Front2 merged(ax.data(), ay.data(), ax.size(), rx_, ry_);
  return std::max(0.0, merged.hv_ - hv_);
}

double hypervolume(const std::vector<ObjectiveVector>& front, const ObjectiveVector& ref) {
  return Front2(front, ref).hypervolume();
}

double hvi(const std::vector<ObjectiveVector>& candidates, const std::vector<ObjectiveVector>& front,
           const ObjectiveVector& ref) {
  std::vector<ObjectiveVector> all(front);
  all.insert(all.end(), candidates.begin(), candidates.end());
  return std::max(0.0, hypervolume(all, ref) - hypervolume(front, ref));
}

LogHvDifference log_hv_difference(double hv_reference, double hv) {
  constexpr double kFloor = 1e-12;
  LogHvDifference out;
  double gap = hv_reference - hv;
  if (gap < 0.0) {
    out.flagged = true;
    gap = 0.0;
  }
  out.value = std::log10(gap + kFloor);
  return out;
}

void ParetoArchive::add(ArchiveEntry entry) {
  for (double v : entry.objectives)
    if (!std::isfinite(v)) throw InvalidData("objective values must be finite");
  if (!entries_.empty() && entry.objectives.size() != entries_.front().objectives.size())
    throw InvalidInput("objective vectors differ in dimension");
  const std::size_t idx = entries_.size();
  entries_.push_back(std::move(entry));
  const auto& obj = entries_.back().objectives;
  for (std::size_t j : front_)
    if (dominates(entries_[j].objectives, obj)) return;
  std::erase_if(front_, [&](std::size_t j) { return dominates(obj, entries_[j].objectives); });
  front_.push_back(idx);
}

std::vector<ObjectiveVector> ParetoArchive::front() const {
  std::vector<ObjectiveVector> out;
  out.reserve(front_.size());
  for (std::size_t j : front_) out.push_back(entries_[j].objectives);
  return out;
}

std::vector<ObjectiveVector> ParetoArchive::objectives() const {
  std::vector<ObjectiveVector> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.objectives);
  return out;
}

double ParetoArchive::hypervolume() const {
  if (!ref_) throw InvalidInput("archive reference point is not set");
  return cfbo::hypervolume(front(), *ref_);
}

ObjectiveVector reference_point(const std::vector<ObjectiveVector>& points, double margin) {
  if (points.empty()) throw InvalidInput("reference point needs at least one observation");
  const std::size_t t_count = points.front().size();
  ObjectiveVector ref(t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& p : points) {
      lo = std::min(lo, p[t]);
      hi = std::max(hi, p[t]);
    }
    const double range = hi - lo;
    ref[t] = lo - margin * (range > 0.0 ? range : std::max(std::abs(lo), 1.0));
  }
  return ref;
}

}  // namespace cfbo
