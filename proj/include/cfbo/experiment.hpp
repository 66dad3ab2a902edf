#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cfbo/bo_loop.hpp"
#include "cfbo/config.hpp"

namespace cfbo {

struct ExperimentResult {
  std::vector<RunResult> runs;
  std::vector<AggregateRow> summary;
  std::vector<std::string> files;  // written paths, relative to out_dir
};

/// Runs every (method, seed) pair on one network and writes
///   effective_config.txt, trace_<method>_<seed>.csv,
///   observations_<method>_<seed>.csv, pareto_<method>.csv, summary.csv
/// into config.out_dir. Files are written under a ".partial" name and
/// renamed once complete, so an aborted run leaves only .partial files.
/// Progress and the final HV table go to `log`; wall-clock figures appear
/// only there so the CSVs stay byte-reproducible.
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream& log);

void write_trace_csv(std::ostream& out, const RunResult& run);
void write_observations_csv(std::ostream& out, const RunResult& run);
/// Front points of each run (seed, iteration, objectives), seeds in run order.
void write_pareto_csv(std::ostream& out, const std::vector<const RunResult*>& runs);
void write_summary_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

}  // namespace cfbo
