#include <benchmark/benchmark.h>

#include <random>

#include "brady/arrest_net.hpp"
#include "brady/evaluation.hpp"
#include "brady/ordinal_boost.hpp"
#include "brady/plam.hpp"

namespace {

std::vector<brady::SeriesSample> random_batch(const brady::NetConfig& c, int n) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> e;
  std::vector<brady::SeriesSample> out;
  for (int b = 0; b < n; ++b) {
    brady::SeriesSample s;
    s.channels = Eigen::MatrixXd(c.effective_in_channels(), c.effective_length());
    for (Eigen::Index i = 0; i < s.channels.size(); ++i) s.channels.data()[i] = e(rng);
    s.valid = c.effective_length();
    s.label = b % c.n_classes;
    out.push_back(std::move(s));
  }
  return out;
}

void BM_NetForward(benchmark::State& state) {
  const auto p = brady::init_params(brady::NetConfig{});
  const auto batch = random_batch(p.config, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(brady::forward_batch(p, batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_NetForward)->Arg(1)->Arg(32);

void BM_NetLossAndGradient(benchmark::State& state) {
  const auto p = brady::init_params(brady::NetConfig{});
  const auto batch = random_batch(p.config, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(brady::loss_and_gradient(p, batch, {brady::Mode::Train, 1}));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_NetLossAndGradient)->Arg(32);

std::vector<brady::LabeledFeatures> sim_rows(int n) {
  brady::PlamSimSpec spec;
  spec.n = n;
  spec.seed = 11;
  return brady::simulate_cumulative_logit(spec);
}

void BM_BoostFit(benchmark::State& state) {
  const auto rows = sim_rows(static_cast<int>(state.range(0)));
  brady::BoostConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(brady::fit(rows, cfg));
}
BENCHMARK(BM_BoostFit)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_PlamFit(benchmark::State& state) {
  const auto rows = sim_rows(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(brady::fit_plam(rows));
}
BENCHMARK(BM_PlamFit)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_BinaryAuc(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> label(0, 3);
  std::uniform_real_distribution<double> u;
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<int> truth(n);
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = label(rng);
    score[i] = u(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(brady::binary_auc(truth, score));
}
BENCHMARK(BM_BinaryAuc)->Arg(600)->Arg(10000);

}  // namespace
