#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cfbo/common.hpp"
#include "cfbo/topology.hpp"

namespace cfbo {

enum class Direction { Uplink, Downlink };

/// Decision variables for every connected link, indexed like CovarianceSet::links().
struct PowerAllocation {
  Vector w_ul;
  Vector w_dl;
  Vector p_ul;  // W
  Vector p_dl;  // W

  static PowerAllocation zeros(std::size_t links);
  std::size_t size() const { return static_cast<std::size_t>(p_ul.size()); }
};

/// Human-readable list of violated budget or fraction constraints; empty when feasible.
std::vector<std::string> constraint_violations(const PowerAllocation& alloc, const Network& network);

/// Pilot-training statistics F = sum_b R_b |psi_b^H psi|^2 + sigma^2 ||psi||^2 I.
///
/// F depends on a link only through its pilot, so one matrix and one Cholesky
/// factor are kept per pilot in use.
class PrecodingStats {
 public:
  const CMatrix& f(const Link& link) const { return f_[ue_pilot_[link.ue]]; }
  /// F^{-1} rhs for the pilot of `link`, through the cached factorization.
  CMatrix solve(const Link& link, const CMatrix& rhs) const { return llt_[ue_pilot_[link.ue]].solve(rhs); }
  double noise_power_ul() const { return noise_ul_; }

 private:
  friend PrecodingStats compute_precoding_stats(const CovarianceSet&, const PilotBook&, double);
  std::vector<int> ue_pilot_;
  double noise_ul_ = 0.0;
  std::vector<CMatrix> f_;
  std::vector<Eigen::LLT<CMatrix>> llt_;
};

/// Throws NumericalError if an F matrix fails to factor.
PrecodingStats compute_precoding_stats(const CovarianceSet& covariances, const PilotBook& pilots,
                                       double noise_power_ul);

struct SinrBreakdown {
  double array_gain = 0.0;
  double coherent = 0.0;
  double incoherent = 0.0;
  double noise = 0.0;

  double sinr() const { return array_gain / (coherent + incoherent + noise); }
};

/// Power-independent trace coefficients from which every SINR term is a
/// weighted sum of powers.
///
///   trace_q(a)        = Tr(R_a F_a^{-1} R_a)
///   incoherent(a, b)  = Tr(R_a R_b F_b^{-1} R_b)
///   coherent[a]       = pilot-sharing partners b != a with
///                       |Tr(R_b F_a^{-1} R_a)|^2 (uplink) and
///                       |Tr(R_a F_b^{-1} R_b)|^2 (downlink)
struct CouplingTables {
  struct Partner {
    std::size_t link = 0;
    double overlap = 0.0;  // |psi_a^H psi_b|^2
    double uplink = 0.0;
    double downlink = 0.0;
  };

  Vector trace_q;
  Vector pilot_gain;  // ||psi_a||^4
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> incoherent;
  std::vector<std::vector<Partner>> coherent;
};

/// OpenMP kernel. Uses diagonal sums against the Toeplitz generators when the
/// covariances are Toeplitz, dense traces otherwise.
CouplingTables build_coupling(const CovarianceSet& covariances, const PilotBook& pilots,
                              const PrecodingStats& stats);

/// Serial reference: every trace formed from dense matrices.
CouplingTables build_coupling_reference(const CovarianceSet& covariances, const PilotBook& pilots,
                                        const PrecodingStats& stats);

/// Closed-form SINR of one link computed term by term from the matrices.
/// Serial reference for LinkModel::sinr; costs O(links * M^3).
SinrBreakdown sinr_reference(const Network& network, const PrecodingStats& stats, std::size_t link,
                             Direction direction, const PowerAllocation& alloc);

/// w (1 - tau_p / tau_c) log2(1 + SINR)
double ergodic_se(double sinr, double fraction, int pilot_len, int coherence_len);

struct SpectralEfficiency {
  Vector ul;
  Vector dl;
  double sum_ul = 0.0;
  double sum_dl = 0.0;
  double sum_total = 0.0;
  double min_link_total = 0.0;
};

struct Objectives {
  std::vector<double> vector;  // (sum UL SE, sum DL SE)
  double total = 0.0;
  double min_link_total = 0.0;
};

Objectives objectives(const SpectralEfficiency& se);

/// Network plus its precoding statistics and coupling tables; immutable once built.
class LinkModel {
 public:
  explicit LinkModel(Network network);

  const Network& network() const { return network_; }
  const PrecodingStats& stats() const { return stats_; }
  const CouplingTables& tables() const { return tables_; }
  std::size_t num_links() const { return network_.covariances.size(); }

  SinrBreakdown sinr(std::size_t link, Direction direction, const PowerAllocation& alloc) const;
  double ergodic_se(std::size_t link, Direction direction, const PowerAllocation& alloc) const;

  /// Per-link SE in parallel, aggregates by ordered serial reduction.
  SpectralEfficiency evaluate(const PowerAllocation& alloc) const;
  SpectralEfficiency evaluate_serial(const PowerAllocation& alloc) const;
  Objectives objectives(const PowerAllocation& alloc) const { return cfbo::objectives(evaluate(alloc)); }

 private:
  Network network_;
  PrecodingStats stats_;
  CouplingTables tables_;
};

/// One draw of every channel, pilot observation and MMSE estimate.
struct ChannelRealization {
  std::vector<CVector> channels;   // h_b ~ CN(0, R_b)
  std::vector<CMatrix> received;   // Y_b = sum_c h_c psi_c^H + N_b
  std::vector<CVector> estimates;  // ||psi_b||^2 R_b F_b^{-1} Y_b psi_b
};

class RealizationSampler {
 public:
  RealizationSampler(const Network& network, const PrecodingStats& stats);

  ChannelRealization draw(Rng& rng) const;

  /// SINR with MR combining (uplink) or unit-norm MR precoding (downlink).
  /// The desired signal is the part received through the channel estimate.
  double instantaneous_sinr(const ChannelRealization& real, std::size_t link, Direction direction,
                            const PowerAllocation& alloc) const;

  /// E||h_hat_b||^2 = ||psi_b||^4 Tr(R_b F_b^{-1} R_b)
  double estimate_power(std::size_t link) const { return estimate_power_[link]; }

 private:
  const Network* network_;
  std::vector<CMatrix> sqrt_r_;
  std::vector<CMatrix> estimator_;  // ||psi||^2 R F^{-1}
  std::vector<double> estimate_power_;
};

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Average of instantaneous per-realization SE; sanity oracle for the
/// closed form. Throws InvalidConfig when n_realizations == 0.
McEstimate mc_validate_se(const Network& network, const PrecodingStats& stats, std::size_t link,
                          Direction direction, const PowerAllocation& alloc, std::size_t n_realizations, Rng& rng);

}  // namespace cfbo
