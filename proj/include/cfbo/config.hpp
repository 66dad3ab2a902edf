#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfbo/bo_loop.hpp"
#include "cfbo/topology.hpp"

namespace cfbo {

struct ExperimentConfig {
  std::string preset;  // empty when built from defaults
  NetworkConfig network;
  CodecOptions codec;
  BoConfig bo;  // bo.method and bo.seed are set per run from the lists below
  std::vector<Method> methods{Method::Nehvi, Method::Ehvi, Method::Sobol};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string out_dir = "out";

  /// Throws InvalidConfig whose message starts with the offending key.
  void validate() const;
};

std::vector<std::string> preset_names();
/// Throws InvalidConfig for an unknown name.
ExperimentConfig make_preset(const std::string& name);

/// Every recognised key, in emission order.
std::vector<std::string> config_keys();

/// Parses `section.key = value` lines; '#' starts a comment. The preset is
/// taken from `preset_override` when non-empty, else from experiment.preset
/// in the text; it is expanded first and the remaining lines apply on top.
/// Errors are InvalidConfig prefixed with "<source>:<line>: ".
ExperimentConfig parse_config_text(const std::string& text, const std::string& source = "<config>",
                                   const std::string& preset_override = "");
/// Missing or unreadable file -> InvalidConfig.
ExperimentConfig parse_config(const std::string& path, const std::string& preset_override = "");

/// Applies one "section.key=value" assignment.
void apply_override(ExperimentConfig& config, const std::string& assignment);

/// Effective configuration in the parseable format, every key present.
std::string emit_config(const ExperimentConfig& config);

}  // namespace cfbo
