#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cfbo/config.hpp"
#include "cfbo/experiment.hpp"
#include "cfbo/topology.hpp"

namespace {

struct Options {
  std::string config_path;
  std::string scenario;
  std::vector<std::string> methods;
  std::vector<std::uint64_t> seeds;
  std::size_t budget = 0;
  int batch_size = 0;
  std::string out_dir;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("-c,--config", o.config_path, "config file (section.key = value lines)");
  cmd->add_option("-s,--scenario", o.scenario, "preset name; replaces experiment.preset");
  cmd->add_option("-m,--method", o.methods, "method(s): nehvi, ehvi, sobol")->delimiter(',');
  cmd->add_option("--seed,--seeds", o.seeds, "replicate seed(s), comma separated")->delimiter(',');
  cmd->add_option("-b,--budget", o.budget, "evaluations per run");
  cmd->add_option("-q,--batch-size", o.batch_size, "candidates per acquisition step");
  cmd->add_option("-o,--out-dir", o.out_dir, "output directory");
  cmd->add_option("--override", o.overrides, "section.key=value, applied last; repeatable");
}

cfbo::ExperimentConfig resolve(const Options& o) {
  cfbo::ExperimentConfig cfg;
  if (!o.config_path.empty()) cfg = cfbo::parse_config(o.config_path, o.scenario);
  else if (!o.scenario.empty()) cfg = cfbo::make_preset(o.scenario);
  if (!o.methods.empty()) {
    cfg.methods.clear();
    for (const auto& m : o.methods) cfg.methods.push_back(cfbo::parse_method(m));
  }
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (o.budget > 0) cfg.bo.budget = o.budget;
  if (o.batch_size > 0) cfg.bo.acquisition.batch_size = o.batch_size;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  for (const auto& a : o.overrides) cfbo::apply_override(cfg, a);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cell-free massive-MIMO power control with multi-objective Bayesian optimization"};
  app.require_subcommand(1);
  Options opts;

  auto* run_cmd = app.add_subcommand("run", "run an experiment and write CSV outputs");
  add_common(run_cmd, opts);
  auto* topo_cmd = app.add_subcommand("topology", "print the network snapshot (positions, beta table)");
  add_common(topo_cmd, opts);
  auto* cfg_cmd = app.add_subcommand("config", "print the effective configuration");
  add_common(cfg_cmd, opts);
  auto* presets_cmd = app.add_subcommand("presets", "list scenario presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (presets_cmd->parsed()) {
      for (const auto& name : cfbo::preset_names()) std::cout << name << '\n';
      return 0;
    }
    const cfbo::ExperimentConfig cfg = resolve(opts);
    if (cfg_cmd->parsed()) {
      std::cout << cfbo::emit_config(cfg);
    } else if (topo_cmd->parsed()) {
      cfbo::write_snapshot(std::cout, cfbo::build_network(cfg.network));
    } else if (run_cmd->parsed()) {
      cfbo::run_experiment(cfg, std::cout);
    }
    return 0;
  } catch (const cfbo::InvalidConfig& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const cfbo::PlacementInfeasible& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const cfbo::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
