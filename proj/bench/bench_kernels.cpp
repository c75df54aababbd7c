// Serial reference vs OpenMP kernels at the sizes the model actually uses.
// Run with OMP_NUM_THREADS set to compare thread counts.

#include <benchmark/benchmark.h>

#include <vector>

#include "gkan/kernels.hpp"
#include "gkan/rng.hpp"

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  gkan::Rng rng = gkan::derive_rng(seed, 1);
  std::vector<double> v(n);
  for (double& x : v) x = gkan::standard_normal(rng);
  return v;
}

// ROI propagator (N x N) times hidden features (N x 32).
template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t hidden = 32;
  const auto a = random_values(n * n, 1);
  const auto b = random_values(n * hidden, 2);
  std::vector<double> out(n * hidden);
  for (auto _ : state) {
    if constexpr (Parallel) gkan::kernels::omp::matmul(a, b, out, n, n, hidden);
    else gkan::kernels::serial::matmul(a, b, out, n, n, hidden);
    benchmark::DoNotOptimize(out.data());
  }
}

// Correlation over subjects x ROIs.
template <bool Parallel>
void BM_Pearson(benchmark::State& state) {
  const auto cols = static_cast<std::size_t>(state.range(0));
  const std::size_t rows = 110;
  const auto x = random_values(rows * cols, 3);
  std::vector<double> out(cols * cols);
  for (auto _ : state) {
    if constexpr (Parallel) gkan::kernels::omp::pearson_matrix(x, out, rows, cols);
    else gkan::kernels::serial::pearson_matrix(x, out, rows, cols);
    benchmark::DoNotOptimize(out.data());
  }
}

// KAN basis expansion of an N x 32 activation with G = 10.
template <bool Parallel>
void BM_GridExpand(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t cols = 32, grid = 10;
  const auto x = random_values(rows * cols, 4);
  std::vector<double> out(rows * cols * grid);
  for (auto _ : state) {
    if constexpr (Parallel) gkan::kernels::omp::relu_grid_expand(x, out, rows, cols, grid);
    else gkan::kernels::serial::relu_grid_expand(x, out, rows, cols, grid);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_Matmul<false>)->Arg(90)->Arg(256)->Arg(1024);
BENCHMARK(BM_Matmul<true>)->Arg(90)->Arg(256)->Arg(1024);
BENCHMARK(BM_Pearson<false>)->Arg(90)->Arg(400);
BENCHMARK(BM_Pearson<true>)->Arg(90)->Arg(400);
BENCHMARK(BM_GridExpand<false>)->Arg(90)->Arg(1024);
BENCHMARK(BM_GridExpand<true>)->Arg(90)->Arg(1024);

BENCHMARK_MAIN();
