// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "rtls/building.hpp"
#include "rtls/kernels.hpp"
#include "rtls/rng.hpp"

namespace {

using namespace rtls;

std::vector<double> filled(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <void (*Kernel)(kernels::MatView, std::span<const double>, std::span<double>)>
void gemv(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = filled(static_cast<std::size_t>(n) * n, 1);
  const auto x = filled(n, 2);
  std::vector<double> y(n, 0.0);
  for (auto _ : state) {
    Kernel({a, n, n}, x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}

template <void (*Kernel)(std::span<double>, int, int, std::span<const double>,
                         std::span<const double>)>
void ger(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto a = filled(static_cast<std::size_t>(n) * n, 1);
  const auto u = filled(n, 2);
  const auto v = filled(n, 3);
  for (auto _ : state) {
    Kernel(a, n, n, u, v);
    benchmark::DoNotOptimize(a.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}

template <std::vector<int> (*Kernel)(const std::vector<std::vector<int>>&, int)>
void hops(benchmark::State& state) {
  auto spec = BuildingSpec::paper();
  spec.zones = static_cast<int>(state.range(0));
  spec.sensors = spec.zones;
  spec.edges = -1;
  const auto b = generate_building(spec);
  std::vector<std::vector<int>> adj;
  for (int z = 0; z < b.graph.zone_count(); ++z) adj.push_back(b.graph.neighbors(z));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(adj, -1));
}

}  // namespace

BENCHMARK(gemv<kernels::serial::gemv_acc>)->Name("gemv/serial")->Arg(200)->Arg(1000);
BENCHMARK(gemv<kernels::parallel::gemv_acc>)->Name("gemv/openmp")->Arg(200)->Arg(1000);
BENCHMARK(gemv<kernels::serial::gemv_t_acc>)->Name("gemv_t/serial")->Arg(200)->Arg(1000);
BENCHMARK(gemv<kernels::parallel::gemv_t_acc>)->Name("gemv_t/openmp")->Arg(200)->Arg(1000);
BENCHMARK(ger<kernels::serial::ger_acc>)->Name("ger/serial")->Arg(200)->Arg(1000);
BENCHMARK(ger<kernels::parallel::ger_acc>)->Name("ger/openmp")->Arg(200)->Arg(1000);
BENCHMARK(hops<kernels::serial::all_pairs_hops>)->Name("hops/serial")->Arg(115)->Arg(1000);
BENCHMARK(hops<kernels::parallel::all_pairs_hops>)->Name("hops/openmp")->Arg(115)->Arg(1000);

BENCHMARK_MAIN();
