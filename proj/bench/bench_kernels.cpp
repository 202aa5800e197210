#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "tagshot/kernels.hpp"

namespace k = tagshot::kernels;

namespace {

std::vector<double> random_rows(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(rows * dim);
  for (auto& x : v) x = d(rng);
  return v;
}

template <bool Parallel>
void BM_cosine_scan(benchmark::State& state) {
  const std::size_t rows = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 768;
  auto data = random_rows(rows, dim, 1);
  auto query = random_rows(1, dim, 2);
  std::vector<double> out(rows);
  k::RowsView view{data, dim};
  for (auto _ : state) {
    if constexpr (Parallel) k::parallel::cosine_scan(query, view, out);
    else k::serial::cosine_scan(query, view, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}

template <bool Parallel>
void BM_cosine_matrix(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 768;
  auto a = random_rows(n, dim, 3);
  auto b = random_rows(n, dim, 4);
  std::vector<double> out(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) k::parallel::cosine_matrix({a, dim}, {b, dim}, out);
    else k::serial::cosine_matrix({a, dim}, {b, dim}, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

template <bool Parallel>
void BM_greedy_match(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  auto sim = random_rows(n, n, 5);
  for (auto _ : state) {
    k::GreedyMatch g = Parallel ? k::parallel::greedy_match(sim, n, n)
                                : k::serial::greedy_match(sim, n, n);
    benchmark::DoNotOptimize(g);
  }
}

}  // namespace

BENCHMARK(BM_cosine_scan<false>)->Arg(1024)->Arg(4096);
BENCHMARK(BM_cosine_scan<true>)->Arg(1024)->Arg(4096);
BENCHMARK(BM_cosine_matrix<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_cosine_matrix<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_greedy_match<false>)->Arg(256)->Arg(1024);
BENCHMARK(BM_greedy_match<true>)->Arg(256)->Arg(1024);

BENCHMARK_MAIN();
