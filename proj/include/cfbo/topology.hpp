#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "cfbo/common.hpp"

namespace cfbo {

/// Physical and radio parameters of one cell-free deployment.
struct NetworkConfig {
  int num_aps = 1;
  int num_ues = 1;
  int antennas = 128;
  double area_side = 500.0;  // m
  double min_dist_ap_ue = 40.0;
  double min_dist_ue_ue = 5.0;
  double min_dist_ap_ap = 100.0;
  int coherence_len = 200;  // symbols
  int pilot_len = 1;        // symbols
  double correlation = 0.5;
  double shadow_std_db = 4.0;
  double noise_power_ul = 3.981071705534973e-13;  // W, -94 dBm
  double noise_power_dl = 3.981071705534973e-13;
  double p_max_ul = 0.2;  // W per link
  double p_max_dl = 0.2;  // W per AP
  int strongest_aps = 0;  // 0 keeps every UE-AP link
  std::uint64_t seed = 1;

  /// Throws InvalidConfig naming the first violated field.
  void validate() const;
};

/// A connected (AP, UE) pair. Links are enumerated AP-major.
struct Link {
  int ap = 0;
  int ue = 0;
  friend bool operator==(const Link&, const Link&) = default;
};

struct NetworkTopology {
  int num_aps = 0;
  int num_ues = 0;
  std::vector<Eigen::Vector2d> ap_positions;
  std::vector<Eigen::Vector2d> ue_positions;
  // All per-pair tables are num_aps x num_ues.
  Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> connectivity;
  Matrix distance;
  Matrix angle;
  Matrix shadow_db;
  Matrix beta;

  bool connected(int ap, int ue) const { return connectivity(ap, ue) != 0; }
  std::vector<Link> links() const;
};

/// Spatial covariances of every connected link.
///
/// Covariances produced by the exponential correlation model are Hermitian
/// Toeplitz and are kept as their first column; anything else is stored dense.
/// Dense matrices are materialized on demand so that large deployments do not
/// hold L*K full M x M matrices.
class CovarianceSet {
 public:
  CovarianceSet() = default;
  static CovarianceSet from_toeplitz(std::vector<Link> links, int num_aps, int num_ues,
                                     std::vector<CVector> first_columns);
  static CovarianceSet from_dense(std::vector<Link> links, int num_aps, int num_ues,
                                  std::vector<CMatrix> matrices);

  std::size_t size() const { return links_.size(); }
  int antennas() const { return antennas_; }
  int num_aps() const { return num_aps_; }
  int num_ues() const { return num_ues_; }
  bool toeplitz() const { return toeplitz_; }
  const std::vector<Link>& links() const { return links_; }
  const Link& link(std::size_t i) const { return links_[i]; }
  /// Index of (ap, ue) in links(), or -1 when the pair is not connected.
  int index_of(int ap, int ue) const { return index_(ap, ue); }

  CMatrix matrix(std::size_t i) const;
  /// First column of a Toeplitz covariance; only valid when toeplitz().
  const CVector& generator(std::size_t i) const { return columns_[i]; }
  double trace(std::size_t i) const;

 private:
  void build_index();

  std::vector<Link> links_;
  int num_aps_ = 0;
  int num_ues_ = 0;
  int antennas_ = 0;
  bool toeplitz_ = false;
  std::vector<CVector> columns_;
  std::vector<CMatrix> dense_;
  Eigen::MatrixXi index_;
};

/// Mutually orthogonal pilot sequences and their assignment to UEs.
/// Every link of a UE shares that UE's pilot.
struct PilotBook {
  int length = 0;
  CMatrix pilots;             // length x length, column i is pilot i
  std::vector<int> ue_pilot;  // pilot index per UE

  int pilot_of(const Link& link) const { return ue_pilot[link.ue]; }
  Complex inner(int i, int j) const { return pilots.col(i).dot(pilots.col(j)); }
  /// |psi_a^H psi_b|^2 for the pilots of two links.
  double overlap(const Link& a, const Link& b) const { return std::norm(inner(pilot_of(a), pilot_of(b))); }
  double norm_sq(const Link& a) const { return pilots.col(pilot_of(a)).squaredNorm(); }
};

/// Rejection-sampled uniform placement of APs then UEs on the square, followed
/// by shadowing, large-scale fading and connectivity.
NetworkTopology place_units(const NetworkConfig& config, Rng& rng);

/// Path loss -148.1 - 37.6 log10(d / 1 km) + z (dB), returned linear.
double large_scale_fading(double distance_m, double shadow_db);

/// One zero-mean normal shadowing draw in dB.
double draw_shadow_db(double std_db, Rng& rng);

/// Exponential correlation model for a uniform linear array; entry (m, n) is
/// beta (mu e^{j theta})^{m-n} for m >= n and Hermitian above the diagonal.
CMatrix spatial_covariance(double beta, double theta, double mu, int antennas);
CVector spatial_covariance_column(double beta, double theta, double mu, int antennas);

CovarianceSet build_covariances(const NetworkTopology& topo, const NetworkConfig& config);

/// |Tr(A B)| / (||A||_F ||B||_F)
double covariance_similarity(const CMatrix& a, const CMatrix& b);

/// With pilot_len >= K every UE gets its own pilot; otherwise UEs are grouped
/// greedily so each pilot's group has the least aggregate covariance
/// similarity over the APs serving both UEs.
PilotBook assign_pilots(const CovarianceSet& covariances, int pilot_len);

/// Everything derived from a NetworkConfig.
struct Network {
  NetworkConfig config;
  NetworkTopology topology;
  CovarianceSet covariances;
  PilotBook pilots;
};

Network build_network(const NetworkConfig& config);

/// Plain-text snapshot of positions, fading and pilot assignment.
void write_snapshot(std::ostream& out, const Network& network);

}  // namespace cfbo
