#include "cfbo/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace cfbo {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_band(std::ostream& out, const Band& b) {
  out << ',' << num(b.mean) << ',' << num(b.min) << ',' << num(b.max) << ',' << num(b.std);
}

std::string run_tag(const RunResult& r) { return to_string(r.method) + "_" + std::to_string(r.seed); }

/// Writes through a ".partial" sibling and renames on success.
template <typename Fn>
void write_file(const fs::path& dir, const std::string& name, Fn&& body, std::vector<std::string>& files) {
  const fs::path final_path = dir / name;
  const fs::path partial = dir / (name + ".partial");
  {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + partial.string());
    body(out);
    out.flush();
    if (!out) throw Error("write failed for " + partial.string());
  }
  fs::rename(partial, final_path);
  if (std::find(files.begin(), files.end(), name) == files.end()) files.push_back(name);
}

}  // namespace

void write_trace_csv(std::ostream& out, const RunResult& run) {
  out << "iteration,method,seed,hypervolume,log_hv_difference,hv_flag,best_total_se,normalized_total_se,fallback\n";
  for (const auto& row : run.trace)
    out << row.iteration << ',' << to_string(row.method) << ',' << run.seed << ',' << num(row.hypervolume) << ','
        << num(row.log_hv_difference) << ',' << (row.hv_flag ? 1 : 0) << ',' << num(row.best_total_se) << ','
        << num(row.normalized_total_se) << ',' << (row.fallback ? 1 : 0) << '\n';
}

void write_observations_csv(std::ostream& out, const RunResult& run) {
  if (run.observations.empty()) return;
  const auto& first = run.observations.front();
  const Eigen::Index d = first.point.size();
  const Eigen::Index n = static_cast<Eigen::Index>(first.allocation.size());
  out << "iteration,seed,fallback";
  for (std::size_t t = 0; t < first.objectives.size(); ++t) out << ",obj_" << t;
  out << ",total_se,min_link_se";
  for (Eigen::Index j = 0; j < d; ++j) out << ",u_" << j;
  for (const char* name : {"p_ul", "p_dl", "w_ul", "w_dl"})
    for (Eigen::Index j = 0; j < n; ++j) out << ',' << name << '_' << j;
  out << '\n';
  for (const auto& rec : run.observations) {
    out << rec.iteration << ',' << run.seed << ',' << (rec.fallback ? 1 : 0);
    for (double v : rec.objectives) out << ',' << num(v);
    out << ',' << num(rec.total_se) << ',' << num(rec.min_link_se);
    for (Eigen::Index j = 0; j < d; ++j) out << ',' << num(rec.point(j));
    for (const Vector* v : {&rec.allocation.p_ul, &rec.allocation.p_dl, &rec.allocation.w_ul, &rec.allocation.w_dl})
      for (Eigen::Index j = 0; j < n; ++j) out << ',' << num((*v)(j));
    out << '\n';
  }
}

void write_pareto_csv(std::ostream& out, const std::vector<const RunResult*>& runs) {
  std::size_t t_count = 2;
  if (!runs.empty() && !runs.front()->observations.empty()) t_count = runs.front()->observations.front().objectives.size();
  out << "seed,iteration";
  for (std::size_t t = 0; t < t_count; ++t) out << ",obj_" << t;
  out << '\n';
  for (const RunResult* r : runs) {
    std::vector<std::size_t> idx = r->archive.front_indices();
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return r->archive.entries()[a].iteration < r->archive.entries()[b].iteration; });
    for (std::size_t i : idx) {
      const auto& e = r->archive.entries()[i];
      out << r->seed << ',' << e.iteration;
      for (double v : e.objectives) out << ',' << num(v);
      out << '\n';
    }
  }
}

void write_summary_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "method,iteration,seeds";
  for (const char* s : {"hv", "log_hv_difference", "normalized_total_se"})
    for (const char* b : {"mean", "min", "max", "std"}) out << ',' << s << '_' << b;
  out << '\n';
  for (const auto& row : rows) {
    out << to_string(row.method) << ',' << row.iteration << ',' << row.seeds;
    write_band(out, row.hypervolume);
    write_band(out, row.log_hv_difference);
    write_band(out, row.normalized_total_se);
    out << '\n';
  }
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const fs::path dir(config.out_dir);
  fs::create_directories(dir);
  ExperimentResult result;
  write_file(dir, "effective_config.txt", [&](std::ostream& out) { out << emit_config(config); }, result.files);

  log << "building network (" << config.network.num_aps << " APs, " << config.network.num_ues << " UEs, M="
      << config.network.antennas << ")\n";
  const LinkModel model(build_network(config.network));
  const DecisionCodec codec(model.network(), config.codec);
  log << "links " << model.num_links() << ", decision dimension " << codec.dim() << '\n';

  for (Method method : config.methods)
    for (std::uint64_t seed : config.seeds) {
      BoConfig bo = config.bo;
      bo.method = method;
      bo.seed = seed;
      RunResult r = run(model, codec, bo);
      log << to_string(method) << " seed " << seed << ": " << r.observations.size() << " evaluations, final HV "
          << num(r.trace.back().hypervolume) << ", " << num(r.wall_clock_s) << " s\n";
      const std::string tag = run_tag(r);
      write_file(dir, "observations_" + tag + ".csv", [&](std::ostream& out) { write_observations_csv(out, r); },
                 result.files);
      // Batch-relative columns are still zero; the final version replaces it below.
      {
        std::ofstream out(dir / ("trace_" + tag + ".csv.partial"), std::ios::binary | std::ios::trunc);
        write_trace_csv(out, r);
      }
      result.runs.push_back(std::move(r));
    }

  normalize_batch(result.runs);
  result.summary = aggregate(result.runs);
  for (const auto& r : result.runs)
    write_file(dir, "trace_" + run_tag(r) + ".csv", [&](std::ostream& out) { write_trace_csv(out, r); }, result.files);
  for (Method method : config.methods) {
    std::vector<const RunResult*> group;
    for (const auto& r : result.runs)
      if (r.method == method) group.push_back(&r);
    write_file(dir, "pareto_" + to_string(method) + ".csv", [&](std::ostream& out) { write_pareto_csv(out, group); },
               result.files);
  }
  write_file(dir, "summary.csv", [&](std::ostream& out) { write_summary_csv(out, result.summary); }, result.files);

  char line[160];
  log << "\nmethod   seed  final_hv                 best_total_se            wall_clock_s\n";
  for (const auto& r : result.runs) {
    std::snprintf(line, sizeof line, "%-8s %5llu  %-24.17g %-24.17g %.3f\n", to_string(r.method).c_str(),
                  static_cast<unsigned long long>(r.seed), r.trace.back().hypervolume, r.trace.back().best_total_se,
                  r.wall_clock_s);
    log << line;
  }
  return result;
}

}  // namespace cfbo
