#include "cfbo/link_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace cfbo {

PowerAllocation PowerAllocation::zeros(std::size_t links) {
  const auto n = static_cast<Eigen::Index>(links);
  return {Vector::Zero(n), Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)};
}

std::vector<std::string> constraint_violations(const PowerAllocation& alloc, const Network& network) {
  std::vector<std::string> out;
  const auto& links = network.covariances.links();
  if (alloc.size() != links.size() || alloc.p_dl.size() != alloc.p_ul.size() ||
      alloc.w_ul.size() != alloc.p_ul.size() || alloc.w_dl.size() != alloc.p_ul.size()) {
    out.emplace_back("allocation size does not match link count");
    return out;
  }
  char buf[160];
  std::vector<double> ap_sum(network.config.num_aps, 0.0);
  for (std::size_t i = 0; i < links.size(); ++i) {
    const auto n = static_cast<Eigen::Index>(i);
    if (!(alloc.p_ul(n) >= 0.0 && alloc.p_ul(n) <= network.config.p_max_ul)) {
      std::snprintf(buf, sizeof buf, "link %zu: p_ul %.17g outside [0, %.17g]", i, alloc.p_ul(n),
                    network.config.p_max_ul);
      out.emplace_back(buf);
    }
    if (!(alloc.p_dl(n) >= 0.0)) {
      std::snprintf(buf, sizeof buf, "link %zu: p_dl %.17g negative", i, alloc.p_dl(n));
      out.emplace_back(buf);
    }
    if (!(alloc.w_ul(n) >= 0.0 && alloc.w_dl(n) >= 0.0 && alloc.w_ul(n) + alloc.w_dl(n) <= 1.0)) {
      std::snprintf(buf, sizeof buf, "link %zu: fractions %.17g + %.17g not in the simplex", i, alloc.w_ul(n),
                    alloc.w_dl(n));
      out.emplace_back(buf);
    }
    ap_sum[links[i].ap] += alloc.p_dl(n);
  }
  for (int l = 0; l < network.config.num_aps; ++l)
    if (ap_sum[l] > network.config.p_max_dl) {
      std::snprintf(buf, sizeof buf, "ap %d: downlink power %.17g exceeds %.17g", l, ap_sum[l],
                    network.config.p_max_dl);
      out.emplace_back(buf);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Precoding statistics

PrecodingStats compute_precoding_stats(const CovarianceSet& cov, const PilotBook& pilots, double noise_power_ul) {
  const int m = cov.antennas();
  PrecodingStats stats;
  stats.ue_pilot_ = pilots.ue_pilot;
  stats.noise_ul_ = noise_power_ul;
  stats.f_.assign(pilots.length, CMatrix());
  stats.llt_.resize(pilots.length);

  std::vector<bool> used(pilots.length, false);
  for (const Link& link : cov.links()) used[pilots.pilot_of(link)] = true;

  for (int p = 0; p < pilots.length; ++p) {
    if (!used[p]) continue;
    const double norm_sq = pilots.pilots.col(p).squaredNorm();
    CMatrix f = CMatrix::Identity(m, m) * (noise_power_ul * norm_sq);
    for (std::size_t b = 0; b < cov.size(); ++b) {
      const double overlap = std::norm(pilots.inner(pilots.pilot_of(cov.link(b)), p));
      if (overlap != 0.0) f += overlap * cov.matrix(b);
    }
    stats.llt_[p].compute(f);
    if (stats.llt_[p].info() != Eigen::Success)
      throw NumericalError("pilot-training matrix F is not positive definite (pilot " + std::to_string(p) + ")");
    stats.f_[p] = std::move(f);
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Coupling tables

namespace {

/// Sums of Z along each diagonal: out(d + M - 1) = sum_n Z(n, n + d).
CVector diagonal_sums(const CMatrix& z) {
  const Eigen::Index m = z.rows();
  CVector out = CVector::Zero(2 * m - 1);
  for (Eigen::Index col = 0; col < m; ++col)
    for (Eigen::Index row = 0; row < m; ++row) out(col - row + m - 1) += z(row, col);
  return out;
}

/// Tr(R Z) for Hermitian Toeplitz R with first column c, given diagonal sums of Z.
Complex toeplitz_trace(const CVector& c, const CVector& sums) {
  const Eigen::Index m = c.size();
  Complex acc = c(0) * sums(m - 1);
  for (Eigen::Index d = 1; d < m; ++d) acc += c(d) * sums(m - 1 + d) + std::conj(c(d)) * sums(m - 1 - d);
  return acc;
}

Complex dense_trace(const CMatrix& a, const CMatrix& b) { return (a.array() * b.transpose().array()).sum(); }

constexpr Eigen::Index kRowBlock = 64;

}  // namespace

CouplingTables build_coupling(const CovarianceSet& cov, const PilotBook& pilots, const PrecodingStats& stats) {
  const auto n = static_cast<Eigen::Index>(cov.size());
  const Eigen::Index m = cov.antennas();
  CouplingTables t;
  t.trace_q.resize(n);
  t.pilot_gain.resize(n);
  t.incoherent.resize(n, n);
  t.coherent.assign(n, {});

  if (!cov.toeplitz()) {
    // Non-Toeplitz covariances only occur in small hand-built networks.
    return build_coupling_reference(cov, pilots, stats);
  }

  // Diagonal sums of Q_b = R_b F_b^{-1} R_b and G_b = F_b^{-1} R_b.
  std::vector<CVector> sums_q(n), sums_g(n);
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index b = 0; b < n; ++b) {
    const CMatrix r = cov.matrix(b);
    const CMatrix g = stats.solve(cov.link(b), r);
    sums_g[b] = diagonal_sums(g);
    sums_q[b] = diagonal_sums(r * g);
  }
  for (Eigen::Index b = 0; b < n; ++b) {
    t.trace_q(b) = sums_q[b](m - 1).real();
    t.pilot_gain(b) = std::pow(pilots.norm_sq(cov.link(b)), 2);
  }

  // Q_b is Hermitian, so Tr(R_a Q_b) = c0 D0 + 2 sum_{d>0} Re(c_d D_d); the
  // whole table is then one real product of generator and sum matrices.
  const Eigen::Index width = 2 * m - 1;
  Matrix gen(n, width), sums(width, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const CVector& c = cov.generator(a);
    gen(a, 0) = c(0).real();
    for (Eigen::Index d = 1; d < m; ++d) {
      gen(a, d) = 2.0 * c(d).real();
      gen(a, m - 1 + d) = -2.0 * c(d).imag();
    }
    const CVector& s = sums_q[a];
    sums(0, a) = s(m - 1).real();
    for (Eigen::Index d = 1; d < m; ++d) {
      sums(d, a) = s(m - 1 + d).real();
      sums(m - 1 + d, a) = s(m - 1 + d).imag();
    }
  }
  const Eigen::Index blocks = (n + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index blk = 0; blk < blocks; ++blk) {
    const Eigen::Index start = blk * kRowBlock;
    const Eigen::Index rows = std::min(kRowBlock, n - start);
    t.incoherent.middleRows(start, rows).noalias() = gen.middleRows(start, rows) * sums;
  }

  // Pilot-sharing partners.
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      if (a == b) continue;
      const double overlap = pilots.overlap(cov.link(a), cov.link(b));
      if (overlap == 0.0) continue;
      CouplingTables::Partner p;
      p.link = static_cast<std::size_t>(b);
      p.overlap = overlap;
      p.uplink = std::norm(toeplitz_trace(cov.generator(b), sums_g[a]));
      p.downlink = std::norm(toeplitz_trace(cov.generator(a), sums_g[b]));
      t.coherent[a].push_back(p);
    }
  }
  return t;
}

CouplingTables build_coupling_reference(const CovarianceSet& cov, const PilotBook& pilots,
                                        const PrecodingStats& stats) {
  const auto n = static_cast<Eigen::Index>(cov.size());
  CouplingTables t;
  t.trace_q.resize(n);
  t.pilot_gain.resize(n);
  t.incoherent.resize(n, n);
  t.coherent.assign(n, {});

  std::vector<CMatrix> r(n), g(n), q(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    r[b] = cov.matrix(b);
    g[b] = stats.solve(cov.link(b), r[b]);
    q[b] = r[b] * g[b];
    t.trace_q(b) = q[b].trace().real();
    t.pilot_gain(b) = std::pow(pilots.norm_sq(cov.link(b)), 2);
  }
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) t.incoherent(a, b) = (r[a] * q[b]).trace().real();
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      if (a == b) continue;
      const double overlap = pilots.overlap(cov.link(a), cov.link(b));
      if (overlap == 0.0) continue;
      CouplingTables::Partner p;
      p.link = static_cast<std::size_t>(b);
      p.overlap = overlap;
      p.uplink = std::norm(dense_trace(r[b], g[a]));
      p.downlink = std::norm(dense_trace(r[a], g[b]));
      t.coherent[a].push_back(p);
    }
  return t;
}

// ---------------------------------------------------------------------------
// Closed-form SINR

SinrBreakdown sinr_reference(const Network& network, const PrecodingStats& stats, std::size_t link,
                             Direction direction, const PowerAllocation& alloc) {
  const auto& cov = network.covariances;
  const auto& pilots = network.pilots;
  const Link& me = cov.link(link);
  const CMatrix r_me = cov.matrix(link);
  const CMatrix g_me = stats.solve(me, r_me);  // F^{-1} R
  const double trace_q_me = (r_me * g_me).trace().real();
  const bool up = direction == Direction::Uplink;
  const Vector& power = up ? alloc.p_ul : alloc.p_dl;

  SinrBreakdown out;
  out.noise = up ? network.config.noise_power_ul : network.config.noise_power_dl;
  out.array_gain = power(static_cast<Eigen::Index>(link)) * std::pow(pilots.norm_sq(me), 2) * trace_q_me;

  for (std::size_t b = 0; b < cov.size(); ++b) {
    if (b == link) continue;
    const double p = power(static_cast<Eigen::Index>(b));
    const CMatrix r_b = cov.matrix(b);
    const double overlap = pilots.overlap(me, cov.link(b));
    if (up) {
      // |psi^H psi|^2 |Tr(R_ij F_lk^-1 R_lk)|^2 / Tr(R_lk F_lk^-1 R_lk)
      out.coherent += p * overlap * std::norm(dense_trace(r_b, g_me)) / trace_q_me;
      out.incoherent += p * (r_b * r_me * g_me).trace().real() / trace_q_me;
    } else {
      const CMatrix g_b = stats.solve(cov.link(b), r_b);
      const double trace_q_b = (r_b * g_b).trace().real();
      // |psi^H psi|^2 |Tr(R_ij F_ij^-1 R_lk)|^2 / Tr(R_ij F_ij^-1 R_ij)
      out.coherent += p * overlap * std::norm((r_b * stats.solve(cov.link(b), r_me)).trace()) / trace_q_b;
      out.incoherent += p * (r_b * g_b * r_me).trace().real() / trace_q_b;
    }
  }
  return out;
}

double ergodic_se(double sinr, double fraction, int pilot_len, int coherence_len) {
  if (fraction == 0.0 || sinr == 0.0) return 0.0;
  const double prelog = 1.0 - static_cast<double>(pilot_len) / coherence_len;
  return fraction * prelog * std::log2(1.0 + sinr);
}

Objectives objectives(const SpectralEfficiency& se) {
  return {{se.sum_ul, se.sum_dl}, se.sum_total, se.min_link_total};
}

// ---------------------------------------------------------------------------
// LinkModel

LinkModel::LinkModel(Network network) : network_(std::move(network)) {
  stats_ = compute_precoding_stats(network_.covariances, network_.pilots, network_.config.noise_power_ul);
  tables_ = build_coupling(network_.covariances, network_.pilots, stats_);
}

SinrBreakdown LinkModel::sinr(std::size_t link, Direction direction, const PowerAllocation& alloc) const {
  const auto a = static_cast<Eigen::Index>(link);
  const auto n = static_cast<Eigen::Index>(num_links());
  const bool up = direction == Direction::Uplink;
  const Vector& power = up ? alloc.p_ul : alloc.p_dl;
  const auto& t = tables_;

  SinrBreakdown out;
  out.noise = up ? network_.config.noise_power_ul : network_.config.noise_power_dl;
  out.array_gain = power(a) * t.pilot_gain(a) * t.trace_q(a);
  if (up) {
    double acc = 0.0;
    for (Eigen::Index b = 0; b < n; ++b)
      if (b != a) acc += power(b) * t.incoherent(b, a);
    out.incoherent = acc / t.trace_q(a);
    double coh = 0.0;
    for (const auto& p : t.coherent[link]) coh += power(static_cast<Eigen::Index>(p.link)) * p.overlap * p.uplink;
    out.coherent = coh / t.trace_q(a);
  } else {
    double acc = 0.0;
    for (Eigen::Index b = 0; b < n; ++b)
      if (b != a) acc += power(b) * t.incoherent(a, b) / t.trace_q(b);
    out.incoherent = acc;
    double coh = 0.0;
    for (const auto& p : t.coherent[link]) {
      const auto b = static_cast<Eigen::Index>(p.link);
      coh += power(b) * p.overlap * p.downlink / t.trace_q(b);
    }
    out.coherent = coh;
  }
  return out;
}

double LinkModel::ergodic_se(std::size_t link, Direction direction, const PowerAllocation& alloc) const {
  const auto a = static_cast<Eigen::Index>(link);
  const double w = direction == Direction::Uplink ? alloc.w_ul(a) : alloc.w_dl(a);
  if (w == 0.0) return 0.0;
  return cfbo::ergodic_se(sinr(link, direction, alloc).sinr(), w, network_.config.pilot_len,
                          network_.config.coherence_len);
}

namespace {

SpectralEfficiency reduce(Vector ul, Vector dl) {
  SpectralEfficiency se;
  se.min_link_total = ul.size() > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  for (Eigen::Index i = 0; i < ul.size(); ++i) {
    se.sum_ul += ul(i);
    se.sum_dl += dl(i);
    se.min_link_total = std::min(se.min_link_total, ul(i) + dl(i));
  }
  se.sum_total = se.sum_ul + se.sum_dl;
  se.ul = std::move(ul);
  se.dl = std::move(dl);
  return se;
}

}  // namespace

SpectralEfficiency LinkModel::evaluate(const PowerAllocation& alloc) const {
  const auto n = static_cast<Eigen::Index>(num_links());
  Vector ul(n), dl(n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index a = 0; a < n; ++a) {
    ul(a) = ergodic_se(static_cast<std::size_t>(a), Direction::Uplink, alloc);
    dl(a) = ergodic_se(static_cast<std::size_t>(a), Direction::Downlink, alloc);
  }
  return reduce(std::move(ul), std::move(dl));
}

SpectralEfficiency LinkModel::evaluate_serial(const PowerAllocation& alloc) const {
  const auto n = static_cast<Eigen::Index>(num_links());
  Vector ul(n), dl(n);
  const int tp = network_.config.pilot_len, tc = network_.config.coherence_len;
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto i = static_cast<std::size_t>(a);
    ul(a) = cfbo::ergodic_se(sinr_reference(network_, stats_, i, Direction::Uplink, alloc).sinr(), alloc.w_ul(a), tp,
                             tc);
    dl(a) = cfbo::ergodic_se(sinr_reference(network_, stats_, i, Direction::Downlink, alloc).sinr(), alloc.w_dl(a),
                             tp, tc);
  }
  return reduce(std::move(ul), std::move(dl));
}

// ---------------------------------------------------------------------------
// Realizations

RealizationSampler::RealizationSampler(const Network& network, const PrecodingStats& stats) : network_(&network) {
  const auto& cov = network.covariances;
  const auto& pilots = network.pilots;
  for (std::size_t b = 0; b < cov.size(); ++b) {
    const CMatrix r = cov.matrix(b);
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(r);
    const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    sqrt_r_.push_back(eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().adjoint());
    // R F^{-1} = (F^{-1} R)^H since both are Hermitian
    const CMatrix g = stats.solve(cov.link(b), r);
    const double norm_sq = pilots.norm_sq(cov.link(b));
    estimator_.push_back(norm_sq * g.adjoint());
    estimate_power_.push_back(norm_sq * norm_sq * (r * g).trace().real());
  }
}

ChannelRealization RealizationSampler::draw(Rng& rng) const {
  const auto& cov = network_->covariances;
  const auto& pilots = network_->pilots;
  const Eigen::Index m = cov.antennas();
  const Eigen::Index tp = pilots.length;
  const double noise_std = std::sqrt(network_->config.noise_power_ul / 2.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto cn = [&](double scale) { return Complex(scale * normal(rng), scale * normal(rng)); };

  ChannelRealization out;
  CMatrix sum = CMatrix::Zero(m, tp);
  for (std::size_t b = 0; b < cov.size(); ++b) {
    CVector z(m);
    for (Eigen::Index i = 0; i < m; ++i) z(i) = cn(std::sqrt(0.5));
    out.channels.push_back(sqrt_r_[b] * z);
    sum += out.channels.back() * pilots.pilots.col(pilots.pilot_of(cov.link(b))).adjoint();
  }
  for (std::size_t b = 0; b < cov.size(); ++b) {
    CMatrix y = sum;
    for (Eigen::Index j = 0; j < tp; ++j)
      for (Eigen::Index i = 0; i < m; ++i) y(i, j) += cn(noise_std);
    out.estimates.push_back(estimator_[b] * (y * pilots.pilots.col(pilots.pilot_of(cov.link(b)))));
    out.received.push_back(std::move(y));
  }
  return out;
}

double RealizationSampler::instantaneous_sinr(const ChannelRealization& real, std::size_t link, Direction direction,
                                              const PowerAllocation& alloc) const {
  const auto a = static_cast<Eigen::Index>(link);
  const std::size_t n = real.channels.size();
  if (direction == Direction::Uplink) {
    const CVector& v = real.estimates[link];
    const double gain = v.squaredNorm();
    if (gain == 0.0 || alloc.p_ul(a) == 0.0) return 0.0;
    double interference = 0.0;
    for (std::size_t b = 0; b < n; ++b)
      if (b != link) interference += alloc.p_ul(static_cast<Eigen::Index>(b)) * std::norm(v.dot(real.channels[b]));
    return alloc.p_ul(a) * gain * gain / (interference + network_->config.noise_power_ul * gain);
  }
  if (alloc.p_dl(a) == 0.0) return 0.0;
  // Unit-norm MR precoders w_b = h_hat_b / ||h_hat_b||; the desired part is
  // h_hat^H w = ||h_hat||.
  const CVector& h = real.channels[link];
  const double signal = real.estimates[link].squaredNorm();
  double interference = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    if (b == link) continue;
    const double norm = real.estimates[b].norm();
    if (norm == 0.0) continue;
    interference += alloc.p_dl(static_cast<Eigen::Index>(b)) * std::norm(h.dot(real.estimates[b])) / (norm * norm);
  }
  return alloc.p_dl(a) * signal / (interference + network_->config.noise_power_dl);
}

McEstimate mc_validate_se(const Network& network, const PrecodingStats& stats, std::size_t link, Direction direction,
                          const PowerAllocation& alloc, std::size_t n_realizations, Rng& rng) {
  if (n_realizations == 0) throw InvalidConfig("n_realizations must be >= 1");
  const RealizationSampler sampler(network, stats);
  const auto a = static_cast<Eigen::Index>(link);
  const double w = direction == Direction::Uplink ? alloc.w_ul(a) : alloc.w_dl(a);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n_realizations; ++i) {
    const ChannelRealization real = sampler.draw(rng);
    const double se = ergodic_se(sampler.instantaneous_sinr(real, link, direction, alloc), w,
                                 network.config.pilot_len, network.config.coherence_len);
    sum += se;
    sum_sq += se * se;
  }
  const double count = static_cast<double>(n_realizations);
  McEstimate est;
  est.mean = sum / count;
  if (n_realizations > 1) {
    const double var = std::max(0.0, (sum_sq - count * est.mean * est.mean) / (count - 1.0));
    est.std_error = std::sqrt(var / count);
  }
  return est;
}

}  // namespace cfbo
