// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include <map>

#include "cfbo/acquisition.hpp"
#include "cfbo/config.hpp"
#include "cfbo/link_metrics.hpp"
#include "cfbo/sobol.hpp"

using namespace cfbo;

namespace {

const Network& network_for(int aps, int ues) {
  static std::map<std::pair<int, int>, Network> cache;
  auto it = cache.find({aps, ues});
  if (it == cache.end()) {
    NetworkConfig c = make_preset("cf5x5").network;
    c.num_aps = aps;
    c.num_ues = ues;
    c.pilot_len = ues;
    c.p_max_dl = 0.2 * ues;
    c.antennas = 64;
    it = cache.emplace(std::make_pair(aps, ues), build_network(c)).first;
  }
  return it->second;
}

PowerAllocation full_power(const Network& net) {
  PowerAllocation a = PowerAllocation::zeros(net.covariances.size());
  a.w_ul.setConstant(0.4);
  a.w_dl.setConstant(0.5);
  a.p_ul.setConstant(net.config.p_max_ul);
  a.p_dl.setConstant(net.config.p_max_dl / net.config.num_ues);
  return a;
}

void BM_CouplingParallel(benchmark::State& state) {
  const Network& net = network_for(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const PrecodingStats stats = compute_precoding_stats(net.covariances, net.pilots, net.config.noise_power_ul);
  for (auto _ : state) benchmark::DoNotOptimize(build_coupling(net.covariances, net.pilots, stats));
}

void BM_CouplingReference(benchmark::State& state) {
  const Network& net = network_for(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const PrecodingStats stats = compute_precoding_stats(net.covariances, net.pilots, net.config.noise_power_ul);
  for (auto _ : state) benchmark::DoNotOptimize(build_coupling_reference(net.covariances, net.pilots, stats));
}

void BM_EvaluateParallel(benchmark::State& state) {
  const LinkModel model(network_for(static_cast<int>(state.range(0)), static_cast<int>(state.range(1))));
  const PowerAllocation a = full_power(model.network());
  for (auto _ : state) benchmark::DoNotOptimize(model.evaluate(a));
}

void BM_EvaluateSerial(benchmark::State& state) {
  const LinkModel model(network_for(static_cast<int>(state.range(0)), static_cast<int>(state.range(1))));
  const PowerAllocation a = full_power(model.network());
  for (auto _ : state) benchmark::DoNotOptimize(model.evaluate_serial(a));
}

struct AcqFixture {
  AcqFixture() : base(128, 2, 20, 1, 3) {
    Rng rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    x = sobol_candidates(20, 8, 9);
    Vector y0(20), y1(20);
    for (Eigen::Index i = 0; i < 20; ++i) {
      y0(i) = x.row(i).sum() + 0.1 * u(rng);
      y1(i) = (1.0 - x.row(i).array()).square().sum();
    }
    KernelParams p;
    p.lengthscales = Vector::Constant(8, 0.8);
    models = {GpModel::with_params(x, y0, p), GpModel::with_params(x, y1, p)};
    std::vector<ObjectiveVector> obs;
    for (Eigen::Index i = 0; i < 20; ++i) obs.push_back({y0(i), y1(i)});
    ref = reference_point(obs);
  }
  Matrix x;
  std::vector<GpModel> models;
  ObjectiveVector ref;
  BaseSamples base;
};

void BM_NehviConditioned(benchmark::State& state) {
  static const AcqFixture f;
  const NehviAcquisition acq(f.models, f.x, f.ref, f.base);
  const Matrix c = sobol_candidates(1, 8, 5);
  for (auto _ : state) benchmark::DoNotOptimize(acq.estimate(c));
}

void BM_NehviDense(benchmark::State& state) {
  static const AcqFixture f;
  const NehviAcquisition acq(f.models, f.x, f.ref, f.base);
  const Matrix c = sobol_candidates(1, 8, 5);
  for (auto _ : state) benchmark::DoNotOptimize(acq.estimate_dense(c));
}

void BM_OptimizeAcquisition(benchmark::State& state) {
  static const AcqFixture f;
  const NehviAcquisition acq(f.models, f.x, f.ref, f.base);
  AcquisitionConfig cfg;
  cfg.max_evals_per_restart = 100;
  for (auto _ : state) {
    Rng rng(7);
    benchmark::DoNotOptimize(optimize_acquisition([&](const Matrix& c) { return acq(c); }, 8, cfg, rng));
  }
}

}  // namespace

BENCHMARK(BM_CouplingParallel)->Args({5, 5})->Args({20, 30})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CouplingReference)->Args({5, 5})->Args({20, 30})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateParallel)->Args({5, 5})->Args({20, 30})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_EvaluateSerial)->Args({5, 5})->Args({20, 30})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_NehviConditioned)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_NehviDense)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_OptimizeAcquisition)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
