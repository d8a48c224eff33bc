#include <benchmark/benchmark.h>

#include <vector>

#include "simvae/kernels.hpp"
#include "simvae/rng.hpp"

namespace {

using simvae::kernels::Layout;

std::vector<double> random_buffer(std::size_t n, std::uint64_t seed) {
  simvae::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// Shapes of the default generator/encoder layers at batch 64.
template <bool Reference>
void BM_Gemm(benchmark::State& state) {
  const auto layout = static_cast<Layout>(state.range(0));
  const std::size_t m = state.range(1), n = state.range(2), k = state.range(3);
  auto a = random_buffer(m * k, 1);
  auto b = random_buffer(k * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    if constexpr (Reference)
      simvae::kernels::reference::gemm(layout, m, n, k, a, b, c);
    else
      simvae::kernels::gemm(layout, m, n, k, a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(2.0 * m * n * k, benchmark::Counter::kIsIterationInvariantRate, benchmark::Counter::kIs1000);
}

void GemmShapes(benchmark::internal::Benchmark* b) {
  for (int layout : {0, 1, 2}) {
    b->Args({layout, 64, 512, 256});
    b->Args({layout, 64, 1024, 512});
    b->Args({layout, 64, 256, 1024});
  }
}

BENCHMARK_TEMPLATE(BM_Gemm, false)->Apply(GemmShapes);
BENCHMARK_TEMPLATE(BM_Gemm, true)->Apply(GemmShapes);

template <bool Reference>
void BM_JointHistogram(benchmark::State& state) {
  const std::size_t n = state.range(0);
  simvae::Rng rng(3);
  std::vector<std::uint16_t> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = static_cast<std::uint16_t>(rng.below(20));
    b[i] = static_cast<std::uint16_t>(rng.below(20));
  }
  std::vector<std::uint64_t> counts(400);
  for (auto _ : state) {
    std::fill(counts.begin(), counts.end(), 0);
    if constexpr (Reference)
      simvae::kernels::reference::joint_histogram(a, b, 20, counts);
    else
      simvae::kernels::joint_histogram(a, b, 20, counts);
    benchmark::DoNotOptimize(counts.data());
  }
}

BENCHMARK_TEMPLATE(BM_JointHistogram, false)->Arg(50000);
BENCHMARK_TEMPLATE(BM_JointHistogram, true)->Arg(50000);

}  // namespace

BENCHMARK_MAIN();
