// Serial against parallel execution of the resampling kernels on identical inputs.
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "tracejudge/stats/basic.hpp"
#include "tracejudge/stats/mcs.hpp"

namespace st = tracejudge::stats;
using tracejudge::Exec;

namespace {

std::vector<double> series(std::size_t n, std::uint64_t seed, double shift) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) {
    const double z = d(rng);
    v = z * z + shift;
  }
  return x;
}

double sample_mean(std::span<const double> x) { return st::mean(x); }

void bootstrap(benchmark::State& state, Exec exec) {
  const auto x = series(static_cast<std::size_t>(state.range(0)), 1, 0.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(st::bootstrap_ci(x, sample_mean, {10000, 0.95, 7, exec}));
  }
}

void model_confidence_set(benchmark::State& state, Exec exec) {
  const auto T = static_cast<std::size_t>(state.range(0));
  const std::vector<std::vector<double>> losses{series(T, 1, 0.0), series(T, 2, 0.05), series(T, 3, 0.1),
                                                series(T, 4, 0.3)};
  const std::vector<std::string> ids{"a", "b", "c", "d"};
  for (auto _ : state) {
    benchmark::DoNotOptimize(st::mcs(losses, ids, {10.0, 5000, 7, exec}));
  }
}

}  // namespace

BENCHMARK_CAPTURE(bootstrap, serial, Exec::Serial)->Arg(500)->Arg(2500)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bootstrap, parallel, Exec::Parallel)->Arg(500)->Arg(2500)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(model_confidence_set, serial, Exec::Serial)->Arg(500)->Arg(2500)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(model_confidence_set, parallel, Exec::Parallel)->Arg(500)->Arg(2500)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
