#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "cfmaps/bench.hpp"
#include "cfmaps/dataset.hpp"
#include "cfmaps/query.hpp"
#include "cfmaps/training.hpp"

namespace {

using namespace cfmaps;

std::vector<std::vector<double>> unit_points(std::size_t n, std::size_t dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> out(n, std::vector<double>(dims));
  for (auto& x : out) {
    for (double& v : x) v = u(rng);
  }
  return out;
}

template <Norm P>
void BM_BoxDistance(benchmark::State& state) {
  const std::size_t dims = static_cast<std::size_t>(state.range(0));
  const auto pts = unit_points(64, dims, 1);
  std::vector<double> lo(dims, 0.3), hi(dims, 0.6);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(detail::box_distance<P>(pts[i++ & 63].data(), lo.data(), hi.data(), nullptr, dims));
  }
}
BENCHMARK(BM_BoxDistance<Norm::kL1>)->Arg(2)->Arg(8)->Arg(32);
BENCHMARK(BM_BoxDistance<Norm::kL2>)->Arg(2)->Arg(8)->Arg(32);
BENCHMARK(BM_BoxDistance<Norm::kLinf>)->Arg(2)->Arg(8)->Arg(32);

struct Synthetic {
  Partition partition;
  KdTree tree;
  std::vector<std::vector<double>> queries;
};

const Synthetic& synthetic(std::size_t n) {
  static std::map<std::size_t, Synthetic> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    Partition p = make_synthetic_partition(n, 4, 2, 11);
    KdTree t = build_index(p, 0);
    it = cache.emplace(n, Synthetic{std::move(p), std::move(t), unit_points(256, 4, 3)}).first;
  }
  return it->second;
}

void BM_NearestRegion(benchmark::State& state) {
  const Synthetic& s = synthetic(static_cast<std::size_t>(state.range(0)));
  const NormSpec norm{};
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(nearest_region(s.tree, s.queries[i++ & 255], norm));
  }
}
BENCHMARK(BM_NearestRegion)->RangeMultiplier(10)->Range(1000, 100000)->Unit(benchmark::kMicrosecond);

void BM_LinearScan(benchmark::State& state) {
  const Synthetic& s = synthetic(static_cast<std::size_t>(state.range(0)));
  const NormSpec norm{};
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(linear_scan_oracle(s.partition, 0, s.queries[i++ & 255], norm));
  }
}
BENCHMARK(BM_LinearScan)->RangeMultiplier(10)->Range(1000, 100000)->Unit(benchmark::kMicrosecond);

void BM_BuildIndex(benchmark::State& state) {
  const Synthetic& s = synthetic(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_index(s.partition, 0));
}
BENCHMARK(BM_BuildIndex)->RangeMultiplier(10)->Range(1000, 100000)->Unit(benchmark::kMillisecond);

void BM_ExtractPartition(benchmark::State& state) {
  const Ensemble e = train_forest(make_blobs(300, 3, 0),
                                  ForestConfig{static_cast<int>(state.range(0)), static_cast<int>(state.range(1))});
  for (auto _ : state) benchmark::DoNotOptimize(extract_partition(e));
}
BENCHMARK(BM_ExtractPartition)->Args({2, 3})->Args({5, 4})->Args({10, 5})->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
