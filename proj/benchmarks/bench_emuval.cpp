#include <emuval/globaltest.hpp>
#include <emuval/localtest.hpp>
#include <emuval/models.hpp>
#include <emuval/parallel.hpp>
#include <emuval/regress.hpp>
#include <emuval/stats.hpp>

#include <benchmark/benchmark.h>

using namespace emuval;

namespace {

LabeledDataset two_groups(std::size_t n, std::size_t dim, double shift) {
  Rng g({1, 0});
  std::vector<double> v;
  std::vector<std::uint8_t> y;
  for (std::size_t i = 0; i < 2 * n; ++i) {
    const std::uint8_t label = i >= n;
    for (std::size_t d = 0; d < dim; ++d) v.push_back(g.normal() + (d == 0 ? shift * label : 0.0));
    y.push_back(label);
  }
  return LabeledDataset(Sample(dim, std::move(v)), std::move(y));
}

void BM_ForestFit(benchmark::State& state) {
  const auto data = two_groups(100, static_cast<std::size_t>(state.range(0)), 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(regress::fit_random_forest(data, {}, {2, 0}));
  }
}
BENCHMARK(BM_ForestFit)->Arg(1)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_KnnBind(benchmark::State& state) {
  const auto data = two_groups(static_cast<std::size_t>(state.range(0)), 10, 1.0);
  const auto stat = stats::TwoSampleStatistic::regression(regress::MethodSpec::knn());
  for (auto _ : state) {
    benchmark::DoNotOptimize(stats::BoundStatistic(stat, data.points()));
  }
}
BENCHMARK(BM_KnnBind)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_PermutationTest(benchmark::State& state) {
  set_thread_count(1);
  const auto data = two_groups(100, 5, 0.5);
  local::LocalTestConfig cfg;
  cfg.statistic = state.range(0) == 0 ? stats::TwoSampleStatistic::regression(regress::MethodSpec::knn())
                                      : stats::TwoSampleStatistic::regression(regress::MethodSpec::random_forest());
  cfg.m_permutations = 99;
  for (auto _ : state) {
    benchmark::DoNotOptimize(local::permutation_test(data, cfg, {3, 0}));
  }
  state.SetLabel(state.range(0) == 0 ? "knn" : "rf");
}
BENCHMARK(BM_PermutationTest)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Mmd(benchmark::State& state) {
  const auto data = two_groups(static_cast<std::size_t>(state.range(0)), 10, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(stats::mmd_statistic(data));
}
BENCHMARK(BM_Mmd)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_Energy(benchmark::State& state) {
  const auto data = two_groups(static_cast<std::size_t>(state.range(0)), 10, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(stats::energy_statistic(data));
}
BENCHMARK(BM_Energy)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_BetaDraw(benchmark::State& state) {
  Rng g({4, 0});
  const double shape = static_cast<double>(state.range(0)) / 10.0;
  for (auto _ : state) benchmark::DoNotOptimize(g.beta(shape, shape));
}
BENCHMARK(BM_BetaDraw)->Arg(5)->Arg(30);

void BM_UniformityNull(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(global::uniformity_null_draws(100, global::Uniformity::ks, 999, {5, 0}));
  }
}
BENCHMARK(BM_UniformityNull)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
