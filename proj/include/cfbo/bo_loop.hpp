#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cfbo/acquisition.hpp"
#include "cfbo/common.hpp"
#include "cfbo/gp.hpp"
#include "cfbo/link_metrics.hpp"
#include "cfbo/pareto.hpp"

namespace cfbo {

/// Which decision variables are free; the rest are held at fixed values.
enum class CodecMode { PowersOnly, WeightsOnly, Mixed, Full };

std::string to_string(CodecMode mode);
/// Throws InvalidConfig on an unknown name.
CodecMode parse_codec_mode(const std::string& name);

struct CodecOptions {
  CodecMode mode = CodecMode::PowersOnly;
  /// One UL power coordinate per UE, shared by all of its links.
  bool tie_ul_power = false;
};

/// Maps the unit cube onto feasible allocations.
///
/// Layout (blocks in this order, each one entry per link unless noted):
///   powers_only  p_ul (per UE if tied), p_dl
///   weights_only a, b
///   mixed        p_dl, v
///   full         p_ul (per UE if tied), p_dl, a, b
/// with w_ul = a b, w_dl = a (1 - b) and, in mixed mode, w_dl = v (1 - w_ul).
///
/// Fixed values: fractions are drawn once from the network seed
/// (a in [0.5, 1), b in [0.2, 0.8)); powers are p_ul = P_ul and an equal
/// split of each AP's DL budget.
class DecisionCodec {
 public:
  DecisionCodec(const Network& network, CodecOptions options);

  std::size_t dim() const { return dim_; }
  CodecMode mode() const { return options_.mode; }
  const CodecOptions& options() const { return options_; }
  const PowerAllocation& fixed() const { return fixed_; }

  /// Total map; out-of-cube inputs are clamped first.
  PowerAllocation decode(const Vector& u) const;
  /// Right inverse of decode: decode(encode(a)) == a whenever a is in the
  /// image of decode. encode(decode(u)) == u where the per-AP DL rescale is
  /// inactive.
  Vector encode(const PowerAllocation& alloc) const;

 private:
  std::size_t ul_block() const;
  void decode_dl(const Vector& u, std::size_t offset, PowerAllocation& out) const;

  CodecOptions options_;
  std::vector<Link> links_;
  int num_aps_ = 0;
  int num_ues_ = 0;
  double p_max_ul_ = 0.0;
  double p_max_dl_ = 0.0;
  std::size_t dim_ = 0;
  PowerAllocation fixed_;
};

enum class Method { Nehvi, Ehvi, Sobol };

std::string to_string(Method method);
Method parse_method(const std::string& name);

enum class ObjectiveMode { UlDl, TotalFairness };

std::string to_string(ObjectiveMode mode);
ObjectiveMode parse_objective_mode(const std::string& name);

struct BoConfig {
  Method method = Method::Nehvi;
  std::size_t budget = 50;
  /// 0 selects min(2d + 1, 10).
  std::size_t initial_design = 0;
  std::uint64_t seed = 1;
  ObjectiveMode objective_mode = ObjectiveMode::UlDl;
  /// Std of Gaussian noise added to observed objectives (0 = exact).
  double observation_noise = 0.0;
  double reference_margin = 0.1;
  AcquisitionConfig acquisition;
  GpFitOptions gp;

  void validate() const;
};

std::size_t initial_design_size(std::size_t dim, std::size_t requested, std::size_t budget);

struct ObservationRecord {
  std::size_t iteration = 0;  // 1-based evaluation index
  Vector point;               // cube coordinates
  PowerAllocation allocation;
  ObjectiveVector objectives;  // as observed (noise included)
  double total_se = 0.0;
  double min_link_se = 0.0;
  double wall_clock_s = 0.0;  // since the start of the run
  bool fallback = false;
};

struct TraceRow {
  std::size_t iteration = 0;
  Method method = Method::Nehvi;
  double hypervolume = 0.0;
  double log_hv_difference = 0.0;
  bool hv_flag = false;  // archive HV exceeded the reference HV
  double best_total_se = 0.0;
  double normalized_total_se = 0.0;
  bool fallback = false;  // surrogate step failed, a Sobol point was used
};

struct RunResult {
  Method method = Method::Nehvi;
  std::uint64_t seed = 0;
  ObjectiveVector reference;
  ParetoArchive archive;
  std::vector<ObservationRecord> observations;
  std::vector<TraceRow> trace;
  double wall_clock_s = 0.0;
};

/// One optimization run; deterministic per config.seed. log-HV difference and
/// normalized SE columns are left at zero until normalize_batch().
RunResult run(const LinkModel& model, const DecisionCodec& codec, const BoConfig& config);

ObjectiveVector select_objectives(const SpectralEfficiency& se, ObjectiveMode mode);

/// Fills the batch-relative columns in place: log-HV difference against the
/// best final HV among runs sharing a seed, and total SE normalized by the
/// best total SE observed anywhere in the batch.
void normalize_batch(std::vector<RunResult>& runs);

struct Band {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double std = 0.0;
};

struct AggregateRow {
  std::size_t iteration = 0;
  Method method = Method::Nehvi;
  std::size_t seeds = 0;
  Band hypervolume;
  Band log_hv_difference;
  Band normalized_total_se;
};

/// Per-method, per-iteration bands across seeds (population std). Runs of a
/// method must have equal trace lengths.
std::vector<AggregateRow> aggregate(const std::vector<RunResult>& runs);

struct Replication {
  std::vector<RunResult> runs;
  std::vector<AggregateRow> summary;
};

/// Runs `config` once per seed, normalizes across the batch and aggregates.
/// Throws InvalidConfig for fewer than two seeds.
Replication replicate(const LinkModel& model, const DecisionCodec& codec, const BoConfig& config,
                      const std::vector<std::uint64_t>& seeds);

}  // namespace cfbo
