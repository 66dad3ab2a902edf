#include "cfbo/config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace cfbo {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) throw InvalidConfig("expected a number, got '" + s + "'");
  return v;
}

template <typename Int>
Int to_int(const std::string& s) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw InvalidConfig("expected an integer, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw InvalidConfig("expected true or false, got '" + s + "'");
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define CFBO_DOUBLE(KEY, MEMBER)                                                      \
  Field {                                                                             \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = to_double(v); }, \
        [](const ExperimentConfig& c) { return format_double(c.MEMBER); }            \
  }
#define CFBO_INT(KEY, MEMBER, TYPE)                                                       \
  Field {                                                                                 \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = to_int<TYPE>(v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); }               \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"experiment.preset", [](ExperimentConfig& c, const std::string& v) { c.preset = v; },
       [](const ExperimentConfig& c) { return c.preset; }},
      {"experiment.methods",
       [](ExperimentConfig& c, const std::string& v) {
         c.methods.clear();
         for (const auto& m : split_list(v)) c.methods.push_back(parse_method(m));
       },
       [](const ExperimentConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.methods.size(); ++i) s += (i ? "," : "") + to_string(c.methods[i]);
         return s;
       }},
      {"experiment.seeds",
       [](ExperimentConfig& c, const std::string& v) {
         c.seeds.clear();
         for (const auto& s : split_list(v)) c.seeds.push_back(to_int<std::uint64_t>(s));
       },
       [](const ExperimentConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.seeds[i]);
         return s;
       }},
      {"experiment.out_dir", [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; },
       [](const ExperimentConfig& c) { return c.out_dir; }},
      CFBO_INT("network.num_aps", network.num_aps, int),
      CFBO_INT("network.num_ues", network.num_ues, int),
      CFBO_INT("network.antennas", network.antennas, int),
      CFBO_DOUBLE("network.area_side", network.area_side),
      CFBO_DOUBLE("network.min_dist_ap_ue", network.min_dist_ap_ue),
      CFBO_DOUBLE("network.min_dist_ue_ue", network.min_dist_ue_ue),
      CFBO_DOUBLE("network.min_dist_ap_ap", network.min_dist_ap_ap),
      CFBO_INT("network.coherence_len", network.coherence_len, int),
      CFBO_INT("network.pilot_len", network.pilot_len, int),
      CFBO_DOUBLE("network.correlation", network.correlation),
      CFBO_DOUBLE("network.shadow_std_db", network.shadow_std_db),
      CFBO_DOUBLE("network.noise_power_ul", network.noise_power_ul),
      CFBO_DOUBLE("network.noise_power_dl", network.noise_power_dl),
      CFBO_DOUBLE("network.p_max_ul", network.p_max_ul),
      CFBO_DOUBLE("network.p_max_dl", network.p_max_dl),
      CFBO_INT("network.strongest_aps", network.strongest_aps, int),
      CFBO_INT("network.seed", network.seed, std::uint64_t),
      {"codec.mode", [](ExperimentConfig& c, const std::string& v) { c.codec.mode = parse_codec_mode(v); },
       [](const ExperimentConfig& c) { return to_string(c.codec.mode); }},
      {"codec.tie_ul_power", [](ExperimentConfig& c, const std::string& v) { c.codec.tie_ul_power = to_bool(v); },
       [](const ExperimentConfig& c) { return std::string(c.codec.tie_ul_power ? "true" : "false"); }},
      CFBO_INT("bo.budget", bo.budget, std::size_t),
      CFBO_INT("bo.initial_design", bo.initial_design, std::size_t),
      {"bo.objective_mode",
       [](ExperimentConfig& c, const std::string& v) { c.bo.objective_mode = parse_objective_mode(v); },
       [](const ExperimentConfig& c) { return to_string(c.bo.objective_mode); }},
      CFBO_DOUBLE("bo.observation_noise", bo.observation_noise),
      CFBO_DOUBLE("bo.reference_margin", bo.reference_margin),
      CFBO_INT("acquisition.n_mc_samples", bo.acquisition.n_mc_samples, int),
      CFBO_INT("acquisition.batch_size", bo.acquisition.batch_size, int),
      CFBO_INT("acquisition.n_restarts", bo.acquisition.n_restarts, int),
      CFBO_INT("acquisition.raw_candidates", bo.acquisition.raw_candidates, int),
      CFBO_INT("acquisition.max_evals_per_restart", bo.acquisition.max_evals_per_restart, int),
      CFBO_DOUBLE("acquisition.initial_step", bo.acquisition.initial_step),
      CFBO_DOUBLE("acquisition.min_step", bo.acquisition.min_step),
      CFBO_INT("gp.restarts", bo.gp.restarts, int),
      CFBO_INT("gp.max_iterations", bo.gp.max_iterations, int),
  };
  return table;
}

#undef CFBO_DOUBLE
#undef CFBO_INT

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

void set_field(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (f == nullptr) throw InvalidConfig("unknown key '" + key + "'");
  try {
    f->set(config, value);
  } catch (const InvalidConfig& e) {
    throw InvalidConfig(key + ": " + e.what());
  }
}

ExperimentConfig base_config(int aps, int ues, double area, CodecMode mode, std::size_t budget) {
  ExperimentConfig c;
  c.network.num_aps = aps;
  c.network.num_ues = ues;
  c.network.antennas = 128;
  c.network.area_side = area;
  c.network.pilot_len = ues;
  c.network.p_max_ul = 0.2;
  c.network.p_max_dl = 0.2 * ues;
  c.codec.mode = mode;
  c.bo.budget = budget;
  return c;
}

}  // namespace

void ExperimentConfig::validate() const {
  network.validate();
  bo.validate();
  if (methods.empty()) throw InvalidConfig("experiment.methods must list at least one method");
  if (seeds.empty()) throw InvalidConfig("experiment.seeds must list at least one seed");
  if (out_dir.empty()) throw InvalidConfig("experiment.out_dir must not be empty");
}

std::vector<std::string> preset_names() {
  return {"link1x1_powers", "link1x1_weights", "link1x1_mixed", "cf5x5", "cf30x20", "cf60x40"};
}

ExperimentConfig make_preset(const std::string& name) {
  ExperimentConfig c;
  if (name == "link1x1_powers") c = base_config(1, 1, 500.0, CodecMode::PowersOnly, 50);
  else if (name == "link1x1_weights") c = base_config(1, 1, 500.0, CodecMode::WeightsOnly, 50);
  else if (name == "link1x1_mixed") c = base_config(1, 1, 500.0, CodecMode::Mixed, 50);
  else if (name == "cf5x5") c = base_config(5, 5, 1000.0, CodecMode::PowersOnly, 50);
  else if (name == "cf30x20") c = base_config(20, 30, 1000.0, CodecMode::PowersOnly, 100);
  else if (name == "cf60x40") c = base_config(40, 60, 1000.0, CodecMode::PowersOnly, 100);
  else throw InvalidConfig("experiment.preset: unknown preset '" + name + "'");
  c.preset = name;
  return c;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& source,
                                   const std::string& preset_override) {
  struct Line {
    int number;
    std::string key;
    std::string value;
  };
  std::vector<Line> lines;
  std::stringstream in(text);
  std::string raw;
  int number = 0;
  auto fail = [&](int line, const std::string& msg) {
    throw InvalidConfig(source + ":" + std::to_string(line) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++number;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) fail(number, "expected 'section.key = value'");
    Line l{number, trim(body.substr(0, eq)), trim(body.substr(eq + 1))};
    if (find_field(l.key) == nullptr) fail(number, "unknown key '" + l.key + "'");
    lines.push_back(std::move(l));
  }

  std::string preset = preset_override;
  int preset_line = 0;
  if (preset.empty())
    for (const auto& l : lines)
      if (l.key == "experiment.preset") {
        preset = l.value;
        preset_line = l.number;
      }

  ExperimentConfig config;
  if (!preset.empty()) {
    try {
      config = make_preset(preset);
    } catch (const InvalidConfig& e) {
      if (preset_line > 0) fail(preset_line, e.what());
      throw;
    }
  }

  std::map<std::string, int> key_line;
  for (const auto& l : lines) {
    if (l.key == "experiment.preset") continue;
    try {
      set_field(config, l.key, l.value);
    } catch (const InvalidConfig& e) {
      fail(l.number, e.what());
    }
    key_line[l.key] = l.number;
  }

  try {
    config.validate();
  } catch (const InvalidConfig& e) {
    const std::string msg = e.what();
    for (const auto& [key, line] : key_line)
      if (msg.rfind(key, 0) == 0) fail(line, msg);
    throw InvalidConfig(source + ": " + msg);
  }
  return config;
}

ExperimentConfig parse_config(const std::string& path, const std::string& preset_override) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig(path + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path, preset_override);
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw InvalidConfig("override '" + assignment + "' is not of the form section.key=value");
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  if (key == "experiment.preset") {
    config = make_preset(value);
    return;
  }
  set_field(config, key, value);
}

std::string emit_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : fields()) {
    const std::string v = f.get(config);
    if (f.key == "experiment.preset" && v.empty()) continue;
    out += f.key + " = " + v + "\n";
  }
  return out;
}

}  // namespace cfbo
