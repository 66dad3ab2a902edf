#include "cfbo/bo_loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>

#include "cfbo/sobol.hpp"

namespace cfbo {

std::string to_string(CodecMode mode) {
  switch (mode) {
    case CodecMode::PowersOnly: return "powers_only";
    case CodecMode::WeightsOnly: return "weights_only";
    case CodecMode::Mixed: return "mixed";
    case CodecMode::Full: return "full";
  }
  return "?";
}

CodecMode parse_codec_mode(const std::string& name) {
  if (name == "powers_only") return CodecMode::PowersOnly;
  if (name == "weights_only") return CodecMode::WeightsOnly;
  if (name == "mixed") return CodecMode::Mixed;
  if (name == "full") return CodecMode::Full;
  throw InvalidConfig("unknown codec mode '" + name + "' (powers_only, weights_only, mixed, full)");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::Nehvi: return "nehvi";
    case Method::Ehvi: return "ehvi";
    case Method::Sobol: return "sobol";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "nehvi") return Method::Nehvi;
  if (name == "ehvi") return Method::Ehvi;
  if (name == "sobol") return Method::Sobol;
  throw InvalidConfig("unknown method '" + name + "' (nehvi, ehvi, sobol)");
}

std::string to_string(ObjectiveMode mode) { return mode == ObjectiveMode::UlDl ? "ul_dl" : "total_fairness"; }

ObjectiveMode parse_objective_mode(const std::string& name) {
  if (name == "ul_dl") return ObjectiveMode::UlDl;
  if (name == "total_fairness") return ObjectiveMode::TotalFairness;
  throw InvalidConfig("unknown objective mode '" + name + "' (ul_dl, total_fairness)");
}

// ---------------------------------------------------------------------------
// Codec

DecisionCodec::DecisionCodec(const Network& network, CodecOptions options)
    : options_(options),
      links_(network.covariances.links()),
      num_aps_(network.config.num_aps),
      num_ues_(network.config.num_ues),
      p_max_ul_(network.config.p_max_ul),
      p_max_dl_(network.config.p_max_dl) {
  const std::size_t n = links_.size();
  const std::size_t ul = ul_block();
  switch (options_.mode) {
    case CodecMode::PowersOnly: dim_ = ul + n; break;
    case CodecMode::WeightsOnly: dim_ = 2 * n; break;
    case CodecMode::Mixed: dim_ = 2 * n; break;
    case CodecMode::Full: dim_ = ul + 3 * n; break;
  }

  fixed_ = PowerAllocation::zeros(n);
  std::vector<int> per_ap(static_cast<std::size_t>(num_aps_), 0);
  for (const auto& link : links_) ++per_ap[static_cast<std::size_t>(link.ap)];
  Rng rng(derive_seed(network.config.seed, 0x77));
  std::uniform_real_distribution<double> share(0.5, 1.0);
  std::uniform_real_distribution<double> split(0.2, 0.8);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double a = share(rng);
    const double b = split(rng);
    fixed_.w_ul(k) = a * b;
    fixed_.w_dl(k) = a * (1.0 - b);
    fixed_.p_ul(k) = p_max_ul_;
    fixed_.p_dl(k) = p_max_dl_ / per_ap[static_cast<std::size_t>(links_[i].ap)];
  }
}

std::size_t DecisionCodec::ul_block() const {
  return options_.tie_ul_power ? static_cast<std::size_t>(num_ues_) : links_.size();
}

void DecisionCodec::decode_dl(const Vector& u, std::size_t offset, PowerAllocation& out) const {
  const std::size_t n = links_.size();
  std::vector<double> raw_sum(static_cast<std::size_t>(num_aps_), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    out.p_dl(static_cast<Eigen::Index>(i)) = u(static_cast<Eigen::Index>(offset + i)) * p_max_dl_;
    raw_sum[static_cast<std::size_t>(links_[i].ap)] += out.p_dl(static_cast<Eigen::Index>(i));
  }
  for (int l = 0; l < num_aps_; ++l) {
    const double total = raw_sum[static_cast<std::size_t>(l)];
    if (total <= p_max_dl_) continue;
    const double factor = p_max_dl_ / total;
    for (std::size_t i = 0; i < n; ++i)
      if (links_[i].ap == l) out.p_dl(static_cast<Eigen::Index>(i)) *= factor;
    // Rounding can leave the sum an ulp over budget; shrink until it fits,
    // summing in the same order as the constraint audit.
    for (int guard = 0; guard < 64; ++guard) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (links_[i].ap == l) sum += out.p_dl(static_cast<Eigen::Index>(i));
      if (sum <= p_max_dl_) break;
      for (std::size_t i = 0; i < n; ++i)
        if (links_[i].ap == l) {
          auto& p = out.p_dl(static_cast<Eigen::Index>(i));
          p = std::nextafter(p, 0.0) * (1.0 - 1e-15);
        }
    }
  }
}

PowerAllocation DecisionCodec::decode(const Vector& u_in) const {
  if (static_cast<std::size_t>(u_in.size()) != dim_) throw InvalidInput("cube point has the wrong dimension");
  const Vector u = u_in.cwiseMax(0.0).cwiseMin(1.0);
  const std::size_t n = links_.size();
  const std::size_t ul = ul_block();
  PowerAllocation out = fixed_;

  auto decode_ul = [&](std::size_t offset) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = options_.tie_ul_power ? static_cast<std::size_t>(links_[i].ue) : i;
      out.p_ul(static_cast<Eigen::Index>(i)) = u(static_cast<Eigen::Index>(offset + j)) * p_max_ul_;
    }
  };
  auto decode_fractions = [&](std::size_t offset) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double a = u(static_cast<Eigen::Index>(offset + i));
      const double b = u(static_cast<Eigen::Index>(offset + n + i));
      out.w_ul(k) = a * b;
      out.w_dl(k) = a * (1.0 - b);
    }
  };

  switch (options_.mode) {
    case CodecMode::PowersOnly:
      decode_ul(0);
      decode_dl(u, ul, out);
      break;
    case CodecMode::WeightsOnly:
      decode_fractions(0);
      break;
    case CodecMode::Mixed:
      decode_dl(u, 0, out);
      for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        out.w_dl(k) = u(static_cast<Eigen::Index>(n + i)) * (1.0 - out.w_ul(k));
      }
      break;
    case CodecMode::Full:
      decode_ul(0);
      decode_dl(u, ul, out);
      decode_fractions(ul + n);
      break;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    while (out.w_ul(k) + out.w_dl(k) > 1.0) out.w_dl(k) = std::nextafter(out.w_dl(k), 0.0);
  }
  return out;
}

Vector DecisionCodec::encode(const PowerAllocation& alloc) const {
  const std::size_t n = links_.size();
  if (alloc.size() != n) throw InvalidInput("allocation size does not match link count");
  const std::size_t ul = ul_block();
  Vector u = Vector::Zero(static_cast<Eigen::Index>(dim_));

  auto encode_ul = [&](std::size_t offset) {
    for (std::size_t i = n; i-- > 0;) {
      const std::size_t j = options_.tie_ul_power ? static_cast<std::size_t>(links_[i].ue) : i;
      u(static_cast<Eigen::Index>(offset + j)) = alloc.p_ul(static_cast<Eigen::Index>(i)) / p_max_ul_;
    }
  };
  auto encode_dl = [&](std::size_t offset) {
    for (std::size_t i = 0; i < n; ++i)
      u(static_cast<Eigen::Index>(offset + i)) = alloc.p_dl(static_cast<Eigen::Index>(i)) / p_max_dl_;
  };
  auto encode_fractions = [&](std::size_t offset) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double a = alloc.w_ul(k) + alloc.w_dl(k);
      u(static_cast<Eigen::Index>(offset + i)) = a;
      u(static_cast<Eigen::Index>(offset + n + i)) = a > 0.0 ? alloc.w_ul(k) / a : 0.0;
    }
  };

  switch (options_.mode) {
    case CodecMode::PowersOnly:
      encode_ul(0);
      encode_dl(ul);
      break;
    case CodecMode::WeightsOnly:
      encode_fractions(0);
      break;
    case CodecMode::Mixed:
      encode_dl(0);
      for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        const double room = 1.0 - fixed_.w_ul(k);
        u(static_cast<Eigen::Index>(n + i)) = room > 0.0 ? alloc.w_dl(k) / room : 0.0;
      }
      break;
    case CodecMode::Full:
      encode_ul(0);
      encode_dl(ul);
      encode_fractions(ul + n);
      break;
  }
  return u.cwiseMax(0.0).cwiseMin(1.0);
}

// ---------------------------------------------------------------------------
// Loop

void BoConfig::validate() const {
  if (budget < 1) throw InvalidConfig("bo.budget must be >= 1");
  if (!(observation_noise >= 0.0) || !std::isfinite(observation_noise))
    throw InvalidConfig("bo.observation_noise must be finite and >= 0");
  if (!(reference_margin > 0.0)) throw InvalidConfig("bo.reference_margin must be > 0");
  acquisition.validate();
  if (gp.restarts < 1) throw InvalidConfig("gp.restarts must be >= 1");
  if (gp.max_iterations < 1) throw InvalidConfig("gp.max_iterations must be >= 1");
}

std::size_t initial_design_size(std::size_t dim, std::size_t requested, std::size_t budget) {
  const std::size_t n = requested > 0 ? requested : std::min<std::size_t>(2 * dim + 1, 10);
  return std::max<std::size_t>(1, std::min(n, budget));
}

ObjectiveVector select_objectives(const SpectralEfficiency& se, ObjectiveMode mode) {
  if (mode == ObjectiveMode::UlDl) return {se.sum_ul, se.sum_dl};
  return {se.sum_total, se.min_link_total};
}

namespace {

std::vector<GpModel> fit_models(const Matrix& x, const std::vector<ObservationRecord>& obs, const BoConfig& cfg,
                                std::vector<std::optional<KernelParams>>& warm, std::size_t step) {
  std::vector<GpModel> models;
  const std::size_t t_count = obs.front().objectives.size();
  for (std::size_t t = 0; t < t_count; ++t) {
    Vector y(static_cast<Eigen::Index>(obs.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) y(static_cast<Eigen::Index>(i)) = obs[i].objectives[t];
    GpFitOptions opts = cfg.gp;
    opts.initial = warm[t];
    Rng rng(derive_seed(cfg.seed, 1000 + 2 * step + t));
    models.push_back(GpModel::fit(x, y, rng, opts));
    warm[t] = models.back().params();
  }
  return models;
}

}  // namespace

RunResult run(const LinkModel& model, const DecisionCodec& codec, const BoConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  RunResult result;
  result.method = cfg.method;
  result.seed = cfg.seed;
  const std::size_t d = codec.dim();
  const std::size_t n_init = initial_design_size(d, cfg.initial_design, cfg.budget);
  SobolSequence design(d, true, derive_seed(cfg.seed, 1));
  Rng noise_rng(derive_seed(cfg.seed, 2));
  std::normal_distribution<double> noise(0.0, 1.0);
  double best_total = -std::numeric_limits<double>::infinity();

  auto evaluate = [&](const Vector& u, bool fallback) {
    ObservationRecord rec;
    rec.iteration = result.observations.size() + 1;
    rec.point = u;
    rec.allocation = codec.decode(u);
    const SpectralEfficiency se = model.evaluate(rec.allocation);
    rec.objectives = select_objectives(se, cfg.objective_mode);
    if (cfg.observation_noise > 0.0)
      for (double& v : rec.objectives) v += cfg.observation_noise * noise(noise_rng);
    for (double v : rec.objectives)
      if (!std::isfinite(v)) throw NumericalError("objective evaluation produced a non-finite value");
    rec.total_se = se.sum_total;
    rec.min_link_se = se.min_link_total;
    rec.fallback = fallback;
    rec.wall_clock_s = elapsed();
    result.observations.push_back(std::move(rec));
  };

  auto record = [&](const ObservationRecord& rec) {
    result.archive.add({rec.point, rec.objectives, rec.iteration});
    best_total = std::max(best_total, rec.total_se);
    TraceRow row;
    row.iteration = rec.iteration;
    row.method = cfg.method;
    row.hypervolume = result.archive.hypervolume();
    row.best_total_se = best_total;
    row.fallback = rec.fallback;
    result.trace.push_back(row);
  };

  for (std::size_t i = 0; i < n_init; ++i) evaluate(design.next(), false);
  std::vector<ObjectiveVector> initial;
  for (const auto& rec : result.observations) initial.push_back(rec.objectives);
  result.reference = reference_point(initial, cfg.reference_margin);
  result.archive.set_reference(result.reference);
  for (const auto& rec : result.observations) record(rec);

  std::vector<std::optional<KernelParams>> warm(result.reference.size());
  const auto q = static_cast<std::size_t>(cfg.acquisition.batch_size);
  std::size_t step = 0;
  while (result.observations.size() < cfg.budget) {
    Matrix batch;
    bool fallback = false;
    if (cfg.method == Method::Sobol) {
      batch = design.draw(q);
    } else {
      try {
        const std::size_t n = result.observations.size();
        Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < n; ++i) x.row(static_cast<Eigen::Index>(i)) = result.observations[i].point.transpose();
        const std::vector<GpModel> models = fit_models(x, result.observations, cfg, warm, step);

        Rng acq_rng(derive_seed(cfg.seed, 5000 + step));
        const auto n_mc = static_cast<std::size_t>(cfg.acquisition.n_mc_samples);
        if (cfg.method == Method::Nehvi) {
          const BaseSamples base(n_mc, models.size(), n, q, acq_rng());
          const NehviAcquisition acq(models, x, result.reference, base);
          batch = optimize_acquisition([&](const Matrix& c) { return acq(c); }, d, cfg.acquisition, acq_rng).points;
        } else {
          const BaseSamples base(n_mc, models.size(), 0, q, acq_rng());
          const QehviAcquisition acq(models, result.archive.front(), result.reference, base);
          batch = optimize_acquisition([&](const Matrix& c) { return acq(c); }, d, cfg.acquisition, acq_rng).points;
        }
      } catch (const NumericalError&) {
        batch = design.draw(q);
        fallback = true;
      }
    }
    for (Eigen::Index j = 0; j < batch.rows() && result.observations.size() < cfg.budget; ++j) {
      evaluate(batch.row(j).transpose(), fallback);
      record(result.observations.back());
    }
    ++step;
  }
  result.wall_clock_s = elapsed();
  return result;
}

void normalize_batch(std::vector<RunResult>& runs) {
  std::map<std::uint64_t, double> best_hv;
  double best_total = 0.0;
  for (const auto& r : runs) {
    if (r.trace.empty()) continue;
    auto [it, inserted] = best_hv.emplace(r.seed, r.trace.back().hypervolume);
    if (!inserted) it->second = std::max(it->second, r.trace.back().hypervolume);
    for (const auto& row : r.trace) best_total = std::max(best_total, row.best_total_se);
  }
  for (auto& r : runs)
    for (auto& row : r.trace) {
      const LogHvDifference diff = log_hv_difference(best_hv[r.seed], row.hypervolume);
      row.log_hv_difference = diff.value;
      row.hv_flag = diff.flagged;
      row.normalized_total_se = best_total > 0.0 ? row.best_total_se / best_total : 0.0;
    }
}

namespace {

Band band(const std::vector<double>& v) {
  Band b;
  const double n = static_cast<double>(v.size());
  b.min = *std::min_element(v.begin(), v.end());
  b.max = *std::max_element(v.begin(), v.end());
  for (double x : v) b.mean += x;
  b.mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - b.mean) * (x - b.mean);
  b.std = std::sqrt(ss / n);
  return b;
}

}  // namespace

std::vector<AggregateRow> aggregate(const std::vector<RunResult>& runs) {
  std::vector<Method> order;
  for (const auto& r : runs)
    if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);

  std::vector<AggregateRow> out;
  for (Method m : order) {
    std::vector<const RunResult*> group;
    for (const auto& r : runs)
      if (r.method == m) group.push_back(&r);
    const std::size_t len = group.front()->trace.size();
    for (const auto* r : group)
      if (r->trace.size() != len) throw InvalidInput("runs of one method have different trace lengths");
    for (std::size_t i = 0; i < len; ++i) {
      std::vector<double> hv, lhd, nse;
      for (const auto* r : group) {
        hv.push_back(r->trace[i].hypervolume);
        lhd.push_back(r->trace[i].log_hv_difference);
        nse.push_back(r->trace[i].normalized_total_se);
      }
      AggregateRow row;
      row.iteration = group.front()->trace[i].iteration;
      row.method = m;
      row.seeds = group.size();
      row.hypervolume = band(hv);
      row.log_hv_difference = band(lhd);
      row.normalized_total_se = band(nse);
      out.push_back(row);
    }
  }
  return out;
}

Replication replicate(const LinkModel& model, const DecisionCodec& codec, const BoConfig& config,
                      const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() < 2) throw InvalidConfig("replication needs at least two seeds");
  Replication rep;
  for (std::uint64_t s : seeds) {
    BoConfig cfg = config;
    cfg.seed = s;
    rep.runs.push_back(run(model, codec, cfg));
  }
  normalize_batch(rep.runs);
  rep.summary = aggregate(rep.runs);
  return rep;
}

}  // namespace cfbo
