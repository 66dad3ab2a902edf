// Acceptance checks, one PASS/FAIL line per criterion; exits nonzero if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "cfbo/bo_loop.hpp"
#include "cfbo/config.hpp"
#include "cfbo/experiment.hpp"
#include "cfbo/gp.hpp"
#include "cfbo/link_metrics.hpp"
#include "cfbo/pareto.hpp"

using namespace cfbo;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

void criterion1() {
  const auto t0 = Clock::now();
  Rng rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> count(1, 20);
  double worst = 0.0;
  for (int f = 0; f < 50; ++f) {
    std::vector<ObjectiveVector> pts;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) pts.push_back({u(rng), u(rng)});
    const std::vector<ObjectiveVector> front = pareto_front(pts);
    const ObjectiveVector ref{0.0, 0.0};
    double hi_x = 0.0, hi_y = 0.0;
    for (const auto& p : front) {
      hi_x = std::max(hi_x, p[0]);
      hi_y = std::max(hi_y, p[1]);
    }
    const int samples = 1000000;
    long hit = 0;
    for (int s = 0; s < samples; ++s) {
      const double x = hi_x * u(rng), y = hi_y * u(rng);
      for (const auto& p : front)
        if (p[0] >= x && p[1] >= y) {
          ++hit;
          break;
        }
    }
    const double mc = hi_x * hi_y * static_cast<double>(hit) / samples;
    worst = std::max(worst, std::abs(hypervolume(front, ref) - mc) / mc);
  }
  const double t = seconds_since(t0);
  report(1, worst < 0.01 && t < 10.0,
         fmt("50 fronts, max relative HV error vs 1e6-sample MC %.3g (limit 0.01), %.2f s (limit 10 s)", worst, t));
}

void criterion2() {
  Rng rng(202);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    NetworkConfig c;
    c.num_aps = 1;
    c.num_ues = 1;
    c.antennas = 1;
    c.seed = rng();
    c.noise_power_ul = std::pow(10.0, -14.0 + 3.0 * u(rng));
    c.noise_power_dl = std::pow(10.0, -14.0 + 3.0 * u(rng));
    const LinkModel model(build_network(c));
    PowerAllocation a = PowerAllocation::zeros(1);
    a.p_ul(0) = 0.2 * u(rng);
    a.p_dl(0) = 0.2 * u(rng);
    const double beta = model.network().topology.beta(0, 0);
    // tau_p = 1, unit pilot energy: F = beta + sigma^2, estimate variance beta^2 / F.
    const double ul = a.p_ul(0) * beta * beta / (beta + c.noise_power_ul) / c.noise_power_ul;
    const double dl = a.p_dl(0) * beta * beta / (beta + c.noise_power_ul) / c.noise_power_dl;
    worst = std::max(worst, std::abs(model.sinr(0, Direction::Uplink, a).sinr() - ul) / ul);
    worst = std::max(worst, std::abs(model.sinr(0, Direction::Downlink, a).sinr() - dl) / dl);
  }
  report(2, worst <= 1e-10, fmt("1 UE/1 AP, M=1, 100 draws, max relative SINR error %.3g (limit 1e-10)", worst));
}

void criterion3() {
  NetworkConfig c;
  c.num_aps = 1;
  c.num_ues = 1;
  c.antennas = 128;
  c.seed = 303;
  const LinkModel model(build_network(c));
  Rng rng(304);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int outside = 0;
  for (int k = 0; k < 5; ++k) {
    PowerAllocation a = PowerAllocation::zeros(1);
    const double s = u(rng);
    a.w_ul(0) = s * u(rng);
    a.w_dl(0) = s - a.w_ul(0);
    a.p_ul(0) = 0.2 * u(rng);
    a.p_dl(0) = 0.2 * u(rng);
    for (Direction d : {Direction::Uplink, Direction::Downlink}) {
      const McEstimate mc = mc_validate_se(model.network(), model.stats(), 0, d, a, 1000, rng);
      const double closed = model.ergodic_se(0, d, a);
      const double z = std::abs(mc.mean - closed) / mc.std_error;
      worst = std::max(worst, z);
      outside += z > 3.0;
      std::printf("  allocation %d %s: closed %.6f, MC %.6f +- %.6f (%.2f SE)\n", k,
                  d == Direction::Uplink ? "UL" : "DL", closed, mc.mean, mc.std_error, z);
    }
  }
  report(3, outside == 0,
         fmt("single link M=128, 5 allocations x UL/DL, 1e3 realizations, max deviation %.2f SE (limit 3), %g outside",
             worst, outside));
}

void criterion4() {
  Rng rng(404);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  const GpFitOptions floor_opts;
  Matrix x(12, 3);
  Vector y(12);
  for (Eigen::Index i = 0; i < 12; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = u(rng);
    y(i) = 3.0 * z(rng) + 10.0;
  }
  KernelParams p;
  p.lengthscales = Vector::Constant(3, 0.3);
  p.signal_variance = 1.0;
  p.noise_variance = floor_opts.min_noise_variance;
  const GpModel m = GpModel::with_params(x, y, p);
  double interp = 0.0;
  for (Eigen::Index i = 0; i < 12; ++i) interp = std::max(interp, std::abs(m.posterior(x.row(i).transpose()).mean - y(i)));

  // Three points against an explicit-inverse oracle.
  Matrix x3(3, 2);
  x3 << 0.1, 0.8, 0.45, 0.3, 0.9, 0.6;
  Vector y3(3);
  y3 << 0.7, -1.2, 2.4;
  KernelParams p3;
  p3.lengthscales = Vector(2);
  p3.lengthscales << 0.35, 0.6;
  p3.signal_variance = 1.7;
  p3.noise_variance = 0.01;
  const GpModel m3 = GpModel::with_params(x3, y3, p3);
  const double mu = y3.mean();
  const double sd = std::sqrt((y3.array() - mu).square().sum() / 2.0);
  auto k = [&](const Vector& a, const Vector& b) {
    const double r = std::sqrt(std::pow((a(0) - b(0)) / 0.35, 2) + std::pow((a(1) - b(1)) / 0.6, 2));
    return 1.7 * (1.0 + std::sqrt(5.0) * r + 5.0 / 3.0 * r * r) * std::exp(-std::sqrt(5.0) * r);
  };
  Matrix kk(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) kk(i, j) = k(x3.row(i), x3.row(j)) + (i == j ? 0.01 : 0.0);
  const Matrix inv = kk.fullPivLu().inverse();
  double oracle = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Vector q = Vector::NullaryExpr(2, [&] { return u(rng); });
    Vector ks(3);
    for (int i = 0; i < 3; ++i) ks(i) = k(x3.row(i), q);
    const double mean = mu + sd * ks.dot(inv * (y3.array() - mu).matrix() / sd);
    const double var = sd * sd * (1.7 - ks.dot(inv * ks));
    const Posterior post = m3.posterior(q);
    oracle = std::max({oracle, std::abs(post.mean - mean), std::abs(post.variance - var)});
  }
  report(4, interp <= 1e-6 && oracle <= 1e-10,
         fmt("interpolation error %.3g (limit 1e-6); 3-point oracle error %.3g (limit 1e-10)", interp, oracle));
}

void criterion5() {
  const ExperimentConfig cfg = make_preset("cf5x5");
  const Network net = build_network(cfg.network);
  const DecisionCodec codec(net, {CodecMode::Full, false});
  Rng rng(505);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t violations = 0;
  for (int i = 0; i < 100000; ++i) {
    Vector x(static_cast<Eigen::Index>(codec.dim()));
    for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = u(rng);
    violations += constraint_violations(codec.decode(x), net).size();
  }
  report(5, violations == 0,
         fmt("1e5 random cube points on cf5x5 (all variables free): %g violations", static_cast<double>(violations)));
}

RunResult run_preset(const ExperimentConfig& cfg, const LinkModel& model, Method m, std::uint64_t seed,
                     std::size_t budget) {
  const DecisionCodec codec(model.network(), cfg.codec);
  BoConfig bo = cfg.bo;
  bo.method = m;
  bo.seed = seed;
  bo.budget = budget;
  return run(model, codec, bo);
}

void criterion6() {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg = make_preset("link1x1_powers");
  const LinkModel model(build_network(cfg.network));
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const double hn = run_preset(cfg, model, Method::Nehvi, seed, 50).trace.back().hypervolume;
    const double hs = run_preset(cfg, model, Method::Sobol, seed, 50).trace.back().hypervolume;
    std::printf("  seed %llu: nehvi HV %.10g, sobol HV %.10g\n", static_cast<unsigned long long>(seed), hn, hs);
    wins += hn >= hs;
  }
  const double t = seconds_since(t0);
  report(6, wins >= 4 && t < 120.0,
         fmt("link1x1_powers, 50 evaluations: NEHVI HV >= Sobol HV in %g/5 seeds (need 4), %.1f s (limit 120 s)", wins, t));
}

void criterion7() {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg = make_preset("cf5x5");
  const LinkModel model(build_network(cfg.network));
  std::vector<RunResult> runs;
  for (Method m : {Method::Nehvi, Method::Sobol})
    for (std::uint64_t seed = 1; seed <= 5; ++seed) runs.push_back(run_preset(cfg, model, m, seed, 20));
  normalize_batch(runs);
  double nehvi = 0.0, sobol = 0.0;
  for (const auto& r : runs) (r.method == Method::Nehvi ? nehvi : sobol) += r.trace.at(19).normalized_total_se / 5.0;
  const double t = seconds_since(t0);
  report(7, nehvi >= sobol && t < 600.0,
         fmt("cf5x5 normalized total SE at evaluation 20, 5-seed mean: NEHVI %.4f vs Sobol %.4f; %.1f s (limit 600 s)",
             nehvi, sobol, t));
}

void criterion8() {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg = make_preset("cf30x20");
  bool ok = true;
  std::string detail;
  try {
    const LinkModel model(build_network(cfg.network));
    const RunResult r = run_preset(cfg, model, Method::Nehvi, 1, 100);
    bool monotone = r.trace.size() == 100;
    int fallbacks = 0;
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
      if (i > 0 && r.trace[i].hypervolume < r.trace[i - 1].hypervolume) monotone = false;
      fallbacks += r.trace[i].fallback;
    }
    ok = monotone && fallbacks == 0;
    detail = fmt("cf30x20 NEHVI, %g evaluations, %g surrogate fallbacks, final HV %.6g", static_cast<double>(r.trace.size()),
                 fallbacks, r.trace.back().hypervolume);
    detail += monotone ? ", HV nondecreasing" : ", HV DECREASED";
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("cf30x20 NEHVI failed: ") + e.what();
  }
  detail += fmt(", wall-clock %.1f s", seconds_since(t0));
  report(8, ok, detail);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void criterion9() {
  const fs::path root = fs::temp_directory_path() / "cfbo_acceptance_determinism";
  fs::remove_all(root);
  int compared = 0, differing = 0;
  for (const char* preset : {"link1x1_mixed", "cf5x5"}) {
    ExperimentConfig cfg = make_preset(preset);
    cfg.bo.budget = 15;
    cfg.seeds = {1, 2};
    std::ostringstream sink;
    std::vector<std::string> files;
    for (const char* tag : {"a", "b"}) {
      cfg.out_dir = (root / (std::string(preset) + "_" + tag)).string();
      files = run_experiment(cfg, sink).files;
    }
    for (const auto& f : files) {
      if (f.size() < 4 || f.substr(f.size() - 4) != ".csv") continue;
      ++compared;
      differing += slurp(root / (std::string(preset) + "_a") / f) != slurp(root / (std::string(preset) + "_b") / f);
    }
  }
  fs::remove_all(root);
  report(9, compared > 0 && differing == 0,
         fmt("link1x1_mixed and cf5x5 rerun: %g CSV files compared, %g differ", compared, differing));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                    criterion6, criterion7, criterion8, criterion9};
  for (const auto& c : criteria) {
    try {
      c();
    } catch (const std::exception& e) {
      std::printf("FAIL criterion: unexpected error %s\n", e.what());
      ++failures;
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
