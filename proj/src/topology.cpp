#include "cfbo/topology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>

namespace cfbo {

namespace {

constexpr long kPlacementRetryCap = 1'000'000;

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidConfig("network." + what);
}

}  // namespace

void NetworkConfig::validate() const {
  require(num_aps >= 1, "num_aps must be >= 1");
  require(num_ues >= 1, "num_ues must be >= 1");
  require(antennas >= 1, "antennas must be >= 1");
  require(area_side > 0.0, "area_side must be > 0");
  require(min_dist_ap_ue > 0.0, "min_dist_ap_ue must be > 0");
  require(min_dist_ue_ue > 0.0, "min_dist_ue_ue must be > 0");
  require(min_dist_ap_ap > 0.0, "min_dist_ap_ap must be > 0");
  require(pilot_len >= num_ues, "pilot_len must be >= num_ues");
  require(static_cast<long>(pilot_len) <= static_cast<long>(num_ues) * num_aps,
          "pilot_len must be <= num_ues * num_aps");
  require(coherence_len > pilot_len, "coherence_len must exceed pilot_len");
  require(correlation >= 0.0 && correlation <= 1.0, "correlation must lie in [0, 1]");
  require(shadow_std_db >= 0.0, "shadow_std_db must be >= 0");
  require(noise_power_ul > 0.0, "noise_power_ul must be > 0");
  require(noise_power_dl > 0.0, "noise_power_dl must be > 0");
  require(p_max_ul > 0.0, "p_max_ul must be > 0");
  require(p_max_dl > 0.0, "p_max_dl must be > 0");
  require(strongest_aps >= 0 && strongest_aps <= num_aps, "strongest_aps must lie in [0, num_aps]");
}

std::vector<Link> NetworkTopology::links() const {
  std::vector<Link> out;
  for (int l = 0; l < num_aps; ++l)
    for (int k = 0; k < num_ues; ++k)
      if (connected(l, k)) out.push_back({l, k});
  return out;
}

// ---------------------------------------------------------------------------
// CovarianceSet

CovarianceSet CovarianceSet::from_toeplitz(std::vector<Link> links, int num_aps, int num_ues,
                                           std::vector<CVector> first_columns) {
  if (links.size() != first_columns.size()) throw InvalidInput("covariance count mismatch");
  CovarianceSet set;
  set.links_ = std::move(links);
  set.num_aps_ = num_aps;
  set.num_ues_ = num_ues;
  set.toeplitz_ = true;
  set.columns_ = std::move(first_columns);
  set.antennas_ = set.columns_.empty() ? 0 : static_cast<int>(set.columns_.front().size());
  set.build_index();
  return set;
}

CovarianceSet CovarianceSet::from_dense(std::vector<Link> links, int num_aps, int num_ues,
                                        std::vector<CMatrix> matrices) {
  if (links.size() != matrices.size()) throw InvalidInput("covariance count mismatch");
  CovarianceSet set;
  set.links_ = std::move(links);
  set.num_aps_ = num_aps;
  set.num_ues_ = num_ues;
  set.dense_ = std::move(matrices);
  set.antennas_ = set.dense_.empty() ? 0 : static_cast<int>(set.dense_.front().rows());
  set.build_index();
  return set;
}

void CovarianceSet::build_index() {
  index_ = Eigen::MatrixXi::Constant(num_aps_, num_ues_, -1);
  for (std::size_t i = 0; i < links_.size(); ++i) index_(links_[i].ap, links_[i].ue) = static_cast<int>(i);
}

CMatrix CovarianceSet::matrix(std::size_t i) const {
  if (!toeplitz_) return dense_[i];
  const CVector& c = columns_[i];
  const int m = static_cast<int>(c.size());
  CMatrix r(m, m);
  for (int col = 0; col < m; ++col)
    for (int row = 0; row < m; ++row)
      r(row, col) = row >= col ? c(row - col) : std::conj(c(col - row));
  return r;
}

double CovarianceSet::trace(std::size_t i) const {
  if (toeplitz_) return antennas_ * columns_[i](0).real();
  return dense_[i].trace().real();
}

// ---------------------------------------------------------------------------
// Placement and fading

namespace {

bool far_enough(const Eigen::Vector2d& p, const std::vector<Eigen::Vector2d>& others, double min_dist) {
  for (const auto& q : others)
    if ((p - q).norm() < min_dist) return false;
  return true;
}

}  // namespace

NetworkTopology place_units(const NetworkConfig& config, Rng& rng) {
  if (config.num_aps < 1 || config.num_ues < 1) throw InvalidConfig("network must contain at least one AP and one UE");
  config.validate();

  std::uniform_real_distribution<double> coord(0.0, config.area_side);
  long attempts = 0;
  auto draw = [&](auto accept) {
    while (true) {
      if (++attempts > kPlacementRetryCap)
        throw PlacementInfeasible("could not place units after " + std::to_string(kPlacementRetryCap) +
                                  " draws; area_side too small for the minimum distances");
      Eigen::Vector2d p(coord(rng), coord(rng));
      if (accept(p)) return p;
    }
  };

  NetworkTopology topo;
  topo.num_aps = config.num_aps;
  topo.num_ues = config.num_ues;
  for (int l = 0; l < config.num_aps; ++l)
    topo.ap_positions.push_back(draw([&](const Eigen::Vector2d& p) {
      return far_enough(p, topo.ap_positions, config.min_dist_ap_ap);
    }));
  for (int k = 0; k < config.num_ues; ++k)
    topo.ue_positions.push_back(draw([&](const Eigen::Vector2d& p) {
      return far_enough(p, topo.ap_positions, config.min_dist_ap_ue) &&
             far_enough(p, topo.ue_positions, config.min_dist_ue_ue);
    }));

  const int L = config.num_aps, K = config.num_ues;
  topo.distance.resize(L, K);
  topo.angle.resize(L, K);
  topo.shadow_db.resize(L, K);
  topo.beta.resize(L, K);
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < K; ++k) {
      const Eigen::Vector2d delta = topo.ue_positions[k] - topo.ap_positions[l];
      topo.distance(l, k) = delta.norm();
      topo.angle(l, k) = std::atan2(delta.y(), delta.x());
      topo.shadow_db(l, k) = draw_shadow_db(config.shadow_std_db, rng);
      topo.beta(l, k) = large_scale_fading(topo.distance(l, k), topo.shadow_db(l, k));
    }
  }

  topo.connectivity.setOnes(L, K);
  if (config.strongest_aps > 0 && config.strongest_aps < L) {
    topo.connectivity.setZero();
    std::vector<int> order(L);
    for (int k = 0; k < K; ++k) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return topo.beta(a, k) > topo.beta(b, k); });
      for (int n = 0; n < config.strongest_aps; ++n) topo.connectivity(order[n], k) = 1;
    }
  }
  return topo;
}

double large_scale_fading(double distance_m, double shadow_db) {
  if (!(distance_m > 0.0)) throw InvalidDistance("distance must be positive");
  const double db = -148.1 - 37.6 * std::log10(distance_m / 1000.0) + shadow_db;
  return std::pow(10.0, db / 10.0);
}

double draw_shadow_db(double std_db, Rng& rng) {
  if (std_db == 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, std_db)(rng);
}

CVector spatial_covariance_column(double beta, double theta, double mu, int antennas) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw InvalidCorrelation("correlation magnitude must lie in [0, 1]");
  if (antennas < 1) throw InvalidInput("antennas must be >= 1");
  const Complex r = std::polar(mu, theta);
  CVector c(antennas);
  Complex power(1.0, 0.0);
  for (int m = 0; m < antennas; ++m) {
    c(m) = beta * power;
    power *= r;
  }
  return c;
}

CMatrix spatial_covariance(double beta, double theta, double mu, int antennas) {
  const CVector c = spatial_covariance_column(beta, theta, mu, antennas);
  CMatrix r(antennas, antennas);
  for (int col = 0; col < antennas; ++col)
    for (int row = 0; row < antennas; ++row)
      r(row, col) = row >= col ? c(row - col) : std::conj(c(col - row));
  return r;
}

CovarianceSet build_covariances(const NetworkTopology& topo, const NetworkConfig& config) {
  std::vector<Link> links = topo.links();
  std::vector<CVector> columns;
  columns.reserve(links.size());
  for (const Link& link : links)
    columns.push_back(spatial_covariance_column(topo.beta(link.ap, link.ue), topo.angle(link.ap, link.ue),
                                                config.correlation, config.antennas));
  return CovarianceSet::from_toeplitz(std::move(links), topo.num_aps, topo.num_ues, std::move(columns));
}

// ---------------------------------------------------------------------------
// Pilots

double covariance_similarity(const CMatrix& a, const CMatrix& b) {
  const double denom = a.norm() * b.norm();
  if (denom == 0.0) return 0.0;
  // Tr(A B) = sum_{ij} A_ij B_ji
  return std::abs((a.array() * b.transpose().array()).sum()) / denom;
}

PilotBook assign_pilots(const CovarianceSet& covariances, int pilot_len) {
  if (pilot_len < 1) throw InvalidConfig("pilot_len must be >= 1");
  const int K = covariances.num_ues();
  const int L = covariances.num_aps();

  PilotBook book;
  book.length = pilot_len;
  // Scaled identity columns: exactly orthogonal with squared norm pilot_len.
  book.pilots = CMatrix::Identity(pilot_len, pilot_len) * std::sqrt(static_cast<double>(pilot_len));
  book.ue_pilot.assign(K, 0);

  if (pilot_len >= K) {
    std::iota(book.ue_pilot.begin(), book.ue_pilot.end(), 0);
    return book;
  }

  Matrix similarity = Matrix::Zero(K, K);
  for (int l = 0; l < L; ++l) {
    std::vector<std::pair<int, CMatrix>> served;
    for (int k = 0; k < K; ++k) {
      const int idx = covariances.index_of(l, k);
      if (idx >= 0) served.emplace_back(k, covariances.matrix(idx));
    }
    for (std::size_t a = 0; a < served.size(); ++a)
      for (std::size_t b = a + 1; b < served.size(); ++b) {
        const double s = covariance_similarity(served[a].second, served[b].second);
        similarity(served[a].first, served[b].first) += s;
        similarity(served[b].first, served[a].first) += s;
      }
  }

  std::vector<std::vector<int>> groups(pilot_len);
  for (int k = 0; k < K; ++k) {
    int best = 0;
    if (k < pilot_len) {
      best = k;
    } else {
      double best_cost = 0.0;
      for (int p = 0; p < pilot_len; ++p) {
        double cost = 0.0;
        for (int u : groups[p]) cost += similarity(k, u);
        if (p == 0 || cost < best_cost) {
          best = p;
          best_cost = cost;
        }
      }
    }
    groups[best].push_back(k);
    book.ue_pilot[k] = best;
  }
  return book;
}

Network build_network(const NetworkConfig& config) {
  config.validate();
  Rng rng(config.seed);
  Network net;
  net.config = config;
  net.topology = place_units(config, rng);
  net.covariances = build_covariances(net.topology, config);
  net.pilots = assign_pilots(net.covariances, config.pilot_len);
  return net;
}

void write_snapshot(std::ostream& out, const Network& network) {
  const auto& topo = network.topology;
  const auto& cfg = network.config;
  char buf[256];
  out << "# cell-free network snapshot\n";
  std::snprintf(buf, sizeof buf, "aps %d ues %d antennas %d area_side %.17g seed %llu\n", cfg.num_aps, cfg.num_ues,
                cfg.antennas, cfg.area_side, static_cast<unsigned long long>(cfg.seed));
  out << buf;
  out << "[aps] index x y\n";
  for (int l = 0; l < topo.num_aps; ++l) {
    std::snprintf(buf, sizeof buf, "%d %.17g %.17g\n", l, topo.ap_positions[l].x(), topo.ap_positions[l].y());
    out << buf;
  }
  out << "[ues] index x y pilot\n";
  for (int k = 0; k < topo.num_ues; ++k) {
    std::snprintf(buf, sizeof buf, "%d %.17g %.17g %d\n", k, topo.ue_positions[k].x(), topo.ue_positions[k].y(),
                  network.pilots.ue_pilot[k]);
    out << buf;
  }
  out << "[links] ap ue connected distance_m angle_rad shadow_db beta_db\n";
  for (int l = 0; l < topo.num_aps; ++l)
    for (int k = 0; k < topo.num_ues; ++k) {
      std::snprintf(buf, sizeof buf, "%d %d %d %.17g %.17g %.17g %.17g\n", l, k, topo.connected(l, k) ? 1 : 0,
                    topo.distance(l, k), topo.angle(l, k), topo.shadow_db(l, k),
                    10.0 * std::log10(topo.beta(l, k)));
      out << buf;
    }
}

}  // namespace cfbo
