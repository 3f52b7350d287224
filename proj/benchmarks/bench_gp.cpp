#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "mogp/gp.hpp"
#include "mogp/pipeline.hpp"
#include "mogp/spectral.hpp"

using namespace mogp;

namespace {

AugmentedInput inputs(int channels, int per_channel) {
  std::vector<int> ch;
  Eigen::VectorXd x(channels * per_channel);
  for (int m = 0; m < channels; ++m)
    for (int k = 0; k < per_channel; ++k) {
      ch.push_back(m);
      x(m * per_channel + k) = k + 0.1 * m;
    }
  return AugmentedInput(ch, x);
}

void BM_Gram(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const KernelSpec k = default_simulation_kernel(KernelFamily::MOSM, 4, 3);
  const AugmentedInput a = inputs(4, n / 4);
  for (auto _ : state) benchmark::DoNotOptimize(build_gram(k, a));
  state.SetComplexityN(n);
}
BENCHMARK(BM_Gram)->RangeMultiplier(2)->Range(64, 512)->Complexity(benchmark::oNSquared);

void BM_NlmlGrad(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const KernelSpec k = default_simulation_kernel(KernelFamily::MOSM, 4, 3);
  const AugmentedInput a = inputs(4, n / 4);
  const Eigen::VectorXd noise = Eigen::VectorXd::Constant(4, 0.05);
  const Eigen::VectorXd y = sample_prior(k, a, noise, 1);
  ModelState model(k, noise, a, y);
  const Eigen::VectorXd u = model.unconstrained();
  for (auto _ : state) {
    model.set_unconstrained(u);
    benchmark::DoNotOptimize(nlml_grad(model));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_NlmlGrad)->RangeMultiplier(2)->Range(64, 512)->Complexity(benchmark::oNCubed)->Unit(benchmark::kMillisecond);

void BM_LombScargle(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<double> t(n), y(n);
  for (auto& v : t) v = u(rng);
  std::sort(t.begin(), t.end());
  for (std::size_t k = 0; k < n; ++k) y[k] = std::cos(0.8 * t[k]);
  const auto grid = default_freq_grid(std::span<const double>(t));
  for (auto _ : state) benchmark::DoNotOptimize(lomb_scargle(t, y, grid));
  state.SetComplexityN(static_cast<benchmark::IterationCount>(n));
}
BENCHMARK(BM_LombScargle)->RangeMultiplier(2)->Range(100, 800)->Complexity(benchmark::oNSquared);

}  // namespace

BENCHMARK_MAIN();
