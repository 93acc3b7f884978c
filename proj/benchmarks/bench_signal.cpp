#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "brady/features.hpp"
#include "brady/pipeline.hpp"
#include "brady/signal.hpp"
#include "brady/synth.hpp"

namespace {

std::vector<double> noisy_sine(std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> e(0.0, 0.05);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(0.5 * static_cast<double>(i)) + e(rng);
  return x;
}

void BM_SavgolFilter(benchmark::State& state) {
  const auto x = noisy_sine(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(brady::savgol_filter(x, 7, 3));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SavgolFilter)->Arg(300)->Arg(3000);

void BM_FatigueFeature(benchmark::State& state) {
  std::vector<double> a;
  for (int i = 0; i < 10; ++i) a.push_back(1.0 - 0.04 * i + 0.01 * std::sin(i * 1.3));
  for (auto _ : state) benchmark::DoNotOptimize(brady::fatigue_feature(a));
}
BENCHMARK(BM_FatigueFeature);

void BM_ExtractRecording(benchmark::State& state) {
  brady::SeverityProfile p;
  p.noise_sd = 0.03;
  p.n_arrests = 2;
  p.arrest_durations = {0.3, 0.5};
  const auto r = brady::generate(p, brady::MovementKind::FingerTapping).recording;
  const brady::PipelineConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(brady::extract_recording(r, cfg));
}
BENCHMARK(BM_ExtractRecording);

}  // namespace
