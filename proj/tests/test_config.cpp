#include <filesystem>
#include <fstream>
#include <string>

#include "cfbo/config.hpp"
#include "doctest.h"

using namespace cfbo;

namespace {

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const InvalidConfig& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("presets exist with the shared radio parameters") {
    for (const auto& name : preset_names()) {
      const ExperimentConfig c = make_preset(name);
      CHECK(c.preset == name);
      CHECK(c.network.antennas == 128);
      CHECK(c.network.p_max_ul == doctest::Approx(0.2));
      CHECK(c.network.p_max_dl == doctest::Approx(0.2 * c.network.num_ues));
      CHECK(c.network.min_dist_ap_ue == 40.0);
      CHECK(c.network.min_dist_ue_ue == 5.0);
      CHECK(c.network.min_dist_ap_ap == 100.0);
      CHECK_NOTHROW(c.validate());
    }
    CHECK(make_preset("cf30x20").network.num_ues == 30);
    CHECK(make_preset("cf30x20").network.num_aps == 20);
    CHECK(make_preset("cf60x40").network.num_ues == 60);
    CHECK(make_preset("cf60x40").network.num_aps == 40);
    CHECK(make_preset("link1x1_weights").codec.mode == CodecMode::WeightsOnly);
    CHECK_THROWS_AS(make_preset("nope"), InvalidConfig);
  }

  TEST_CASE("empty text with a preset yields the preset") {
    const ExperimentConfig c = parse_config_text("", "x", "cf5x5");
    CHECK(emit_config(c) == emit_config(make_preset("cf5x5")));
    const ExperimentConfig d = parse_config_text("# nothing here\n\n", "x", "cf5x5");
    CHECK(emit_config(d) == emit_config(make_preset("cf5x5")));
  }

  TEST_CASE("a bad value names the key and the line") {
    const std::string msg =
        message_of([] { parse_config_text("experiment.preset = cf5x5\n\nnetwork.p_max_ul = -1\n", "cfg.txt"); });
    CHECK(msg.find("cfg.txt:3:") != std::string::npos);
    CHECK(msg.find("network.p_max_ul") != std::string::npos);
  }

  TEST_CASE("unknown keys and malformed lines are rejected with a line number") {
    const std::string a = message_of([] { parse_config_text("bo.budget = 5\nbo.bugdet = 5\n", "c"); });
    CHECK(a.find("c:2:") != std::string::npos);
    CHECK(a.find("bo.bugdet") != std::string::npos);
    const std::string b = message_of([] { parse_config_text("bo.budget 5\n", "c"); });
    CHECK(b.find("c:1:") != std::string::npos);
    const std::string c = message_of([] { parse_config_text("bo.budget = five\n", "c"); });
    CHECK(c.find("c:1:") != std::string::npos);
    const std::string d = message_of([] { parse_config_text("experiment.preset = cf9x9\n", "c"); });
    CHECK(d.find("c:1:") != std::string::npos);
  }

  TEST_CASE("emitted config reparses to the same config") {
    ExperimentConfig c = make_preset("cf30x20");
    c.seeds = {4, 9};
    c.methods = {Method::Sobol, Method::Nehvi};
    c.network.correlation = 0.123456789012345678;
    c.network.noise_power_dl = 1.0 / 3.0 * 1e-13;
    c.codec.tie_ul_power = true;
    c.bo.observation_noise = 0.01;
    c.bo.acquisition.batch_size = 3;
    const std::string text = emit_config(c);
    const ExperimentConfig back = parse_config_text(text, "emitted");
    CHECK(emit_config(back) == text);
    CHECK(back.network.correlation == c.network.correlation);
    CHECK(back.network.noise_power_dl == c.network.noise_power_dl);
    CHECK(back.seeds == c.seeds);
    CHECK(back.methods == c.methods);
    const auto keys = config_keys();
    for (const auto& k : keys) CHECK(text.find(k + " = ") != std::string::npos);
  }

  TEST_CASE("missing file") {
    CHECK_THROWS_AS(parse_config("/nonexistent/dir/config.txt"), InvalidConfig);
  }

  TEST_CASE("file parse and overrides") {
    const auto path = std::filesystem::temp_directory_path() / "cfbo_test_config.txt";
    {
      std::ofstream out(path);
      out << "experiment.preset = link1x1_powers\nbo.budget = 12   # short\nexperiment.seeds = 3, 4\n";
    }
    ExperimentConfig c = parse_config(path.string());
    CHECK(c.bo.budget == 12);
    CHECK(c.seeds == std::vector<std::uint64_t>{3, 4});
    CHECK(parse_config(path.string(), "cf5x5").network.num_ues == 5);
    apply_override(c, "acquisition.n_mc_samples=256");
    CHECK(c.bo.acquisition.n_mc_samples == 256);
    apply_override(c, "codec.mode = mixed");
    CHECK(c.codec.mode == CodecMode::Mixed);
    CHECK_THROWS_AS(apply_override(c, "gp.restarts"), InvalidConfig);
    CHECK_THROWS_AS(apply_override(c, "gp.nothing=1"), InvalidConfig);
    std::filesystem::remove(path);
  }

  TEST_CASE("validation of experiment fields") {
    ExperimentConfig c = make_preset("cf5x5");
    c.seeds.clear();
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
    c = make_preset("cf5x5");
    c.methods.clear();
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
  }
}
