#pragma once

#include <cstdint>
#include <vector>

#include "cfbo/common.hpp"
#include "cfbo/pareto.hpp"
#include "cfbo/topology.hpp"

namespace cfbo::testing {

/// Hand-rolled value generator for property tests.
struct Gen {
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng); }

  Vector cube(Eigen::Index d) {
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = uniform();
    return v;
  }

  std::vector<ObjectiveVector> points(int n, double lo = 0.0, double hi = 1.0) {
    std::vector<ObjectiveVector> out;
    for (int i = 0; i < n; ++i) out.push_back({uniform(lo, hi), uniform(lo, hi)});
    return out;
  }

  Rng rng;
};

/// Network from explicit covariances; pilots assigned by the library.
inline Network manual_network(NetworkConfig cfg, std::vector<Link> links, std::vector<CMatrix> covs) {
  Network net;
  net.config = cfg;
  net.topology.num_aps = cfg.num_aps;
  net.topology.num_ues = cfg.num_ues;
  net.covariances = CovarianceSet::from_dense(std::move(links), cfg.num_aps, cfg.num_ues, std::move(covs));
  net.pilots = assign_pilots(net.covariances, cfg.pilot_len);
  return net;
}

inline NetworkConfig small_config(int aps, int ues, int antennas, std::uint64_t seed = 7) {
  NetworkConfig c;
  c.num_aps = aps;
  c.num_ues = ues;
  c.antennas = antennas;
  c.pilot_len = ues;
  c.area_side = 1000.0;
  c.p_max_dl = 0.2 * ues;
  c.seed = seed;
  return c;
}

}  // namespace cfbo::testing
