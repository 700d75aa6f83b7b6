#include <benchmark/benchmark.h>

#include "metablue/ams_model.hpp"
#include "metablue/ams_optimizer.hpp"
#include "metablue/channel.hpp"
#include "metablue/common.hpp"
#include "metablue/dsp.hpp"
#include "metablue/receiver_dsp.hpp"
#include "metablue/waveform.hpp"

namespace {

using namespace metablue;

MetasurfaceConfig bench_surface(std::size_t n = 60) {
  MetasurfaceConfig cfg = MetasurfaceConfig::uniform(
      n, 0.033, 0.048, MaterialPair{1939.4, 1500.0, 3.72e-8, 1.39});
  Rng rng(7);
  for (auto& c : cfg.cells) c.solid_len = rng.uniform(0.0, 0.033);
  return cfg;
}

ChirpSpec bench_chirp() {
  ChirpSpec c;
  c.f0 = 125e3;
  c.bandwidth = 250e3;
  c.duration = 0.2e-3;
  c.sample_rate = 2e6;
  return c;
}

void BM_FarFieldPressure(benchmark::State& state) {
  const MetasurfaceConfig cfg = bench_surface(static_cast<std::size_t>(state.range(0)));
  double theta = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(far_field_pressure(cfg, theta, 180e3, {1.0, 0.0}));
    theta += 0.01;
  }
}
BENCHMARK(BM_FarFieldPressure)->Arg(20)->Arg(60);

void BM_BuildGainTable(benchmark::State& state) {
  const MetasurfaceConfig cfg = bench_surface();
  const auto angles = default_angle_grid();
  const auto freqs = linspace(100e3, 200e3, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_gain_table(cfg, angles, freqs));
  }
}
BENCHMARK(BM_BuildGainTable)->Arg(26)->Arg(101)->Unit(benchmark::kMillisecond);

void BM_Fft(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<dsp::cdouble> x(n);
  Rng rng(3);
  for (auto& v : x) v = {rng.gaussian(), rng.gaussian()};
  for (auto _ : state) {
    auto copy = x;
    dsp::fft(copy, false);
    benchmark::DoNotOptimize(copy);
  }
  state.SetComplexityN(static_cast<long>(n));
}
BENCHMARK(BM_Fft)->RangeMultiplier(4)->Range(1024, 65536)->Complexity();

void BM_ShapeByDirection(benchmark::State& state) {
  const ChirpSpec spec = bench_chirp();
  const MetasurfaceConfig cfg = bench_surface();
  const auto table = build_gain_table(
      cfg, default_angle_grid(), linspace(spec.f0, spec.f0 + spec.bandwidth, 101));
  for (auto _ : state) {
    benchmark::DoNotOptimize(shape_by_direction(spec, table, 1.0));
  }
}
BENCHMARK(BM_ShapeByDirection);

void BM_NormalizedXcorr(benchmark::State& state) {
  const ChirpSpec spec = bench_chirp();
  const auto ref = synth_chirp_reference(spec);
  std::vector<double> capture(static_cast<std::size_t>(state.range(0)), 0.0);
  Rng rng(5);
  for (auto& v : capture) v = rng.gaussian();
  for (std::size_t i = 0; i < ref.size(); ++i) capture[1000 + i] += 3.0 * ref[i];
  for (auto _ : state) {
    benchmark::DoNotOptimize(dsp::normalized_xcorr(capture, ref));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_NormalizedXcorr)->Arg(10000)->Arg(40000)->Unit(benchmark::kMillisecond);

void BM_SuppressMultipath(benchmark::State& state) {
  const ChirpSpec spec = bench_chirp();
  const MetasurfaceConfig cfg = bench_surface();
  const auto table = build_gain_table(
      cfg, default_angle_grid(), linspace(spec.f0, spec.f0 + spec.bandwidth, 101));
  auto segment = shape_by_direction(spec, table, 0.7);
  SuppressionParams params;
  params.f_cut = 45e3;
  params.t_min = 0.04e-3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(suppress_multipath(segment, spec, params));
  }
}
BENCHMARK(BM_SuppressMultipath);

void BM_SimulateCapture(benchmark::State& state) {
  ScenarioConfig cfg;
  cfg.geometry.depth = 2.0;
  cfg.anchors.push_back({Vec3{0.0, 0.0, 1.0}, 0.0, bench_surface()});
  cfg.receiver_path.push_back({0.0, Vec3{3.0, 1.0, 0.8}});
  cfg.chirp = bench_chirp();
  cfg.noise_snr_db = 20.0;
  cfg.max_reflections = 2;
  const ScenarioRuntime rt = ScenarioRuntime::build(cfg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_capture(rt, 0, cfg.chirp));
  }
  state.SetLabel("one anchor, 2 bounces");
}
BENCHMARK(BM_SimulateCapture)->Unit(benchmark::kMillisecond);

void BM_AnnealingStep(benchmark::State& state) {
  const MetasurfaceConfig tpl = MetasurfaceConfig::uniform(
      60, 0.033, 0.048, MaterialPair{1939.4, 1500.0, 3.72e-8, 1.39});
  const auto angles = linspace(0.0, kTwoPi * 71.0 / 72.0, 72);
  const auto freqs = linspace(100e3, 200e3, 26);
  OptimizerParams params;
  params.d_max = 0.033;
  params.seed = 1;
  for (auto _ : state) {
    params.max_iters = 100;
    benchmark::DoNotOptimize(optimize(params, tpl, angles, freqs));
  }
  state.SetLabel("100 iterations, 72x26 grid");
}
BENCHMARK(BM_AnnealingStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
