// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "grain/experiments.hpp"
#include "grain/oracle.hpp"

using namespace grain;

namespace {

const std::filesystem::path kData = GRAIN_DATA_DIR;

struct Searched {
  Universe universe;
  PartialOracle top;
};

const Searched& mixed() {
  static const Searched s = [] {
    Searched out{load_universe(kData / "universes" / "mixed.json"), {}};
    SearchOptions opt;
    opt.target_level = 10;
    opt.record_trace = false;
    out.top = search_oracle(out.universe, opt).levels.back();
    return out;
  }();
  return s;
}

void BM_ReflectivityParallel(benchmark::State& state) {
  const auto& s = mixed();
  for (auto _ : state) benchmark::DoNotOptimize(check_partial_reflective(s.top, s.universe));
}
BENCHMARK(BM_ReflectivityParallel)->Unit(benchmark::kMillisecond);

void BM_ReflectivitySerial(benchmark::State& state) {
  const auto& s = mixed();
  for (auto _ : state) benchmark::DoNotOptimize(check_partial_reflective_serial(s.top, s.universe));
}
BENCHMARK(BM_ReflectivitySerial)->Unit(benchmark::kMillisecond);

std::vector<PolicyPtr> pd_profile(const std::shared_ptr<RepeatedGame>& g) {
  return {std::make_shared<StationaryPolicy>(g->player(0).actions, Law{Rational(1, 4), Rational(3, 4)}),
          std::make_shared<GrimTrigger>(g, 1, 0, 1, 3u)};
}

void BM_HistoryDistributionParallel(benchmark::State& state) {
  auto g = prisoners_dilemma();
  auto profile = pd_profile(g);
  const auto horizon = static_cast<unsigned>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(history_distribution(*g, profile, horizon));
}
BENCHMARK(BM_HistoryDistributionParallel)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_HistoryDistributionSerial(benchmark::State& state) {
  auto g = prisoners_dilemma();
  auto profile = pd_profile(g);
  const auto horizon = static_cast<unsigned>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(history_distribution_serial(*g, profile, horizon));
}
BENCHMARK(BM_HistoryDistributionSerial)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

// Repetitions of the grim experiment with 1 thread and with every available thread.
void BM_Repetitions(benchmark::State& state) {
  auto config = load_config(kData / "configs" / "grim_prisoners_dilemma.json");
  const int saved = omp_get_max_threads();
  omp_set_num_threads(static_cast<int>(state.range(0)) == 0 ? omp_get_num_procs() : static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment(config));
  omp_set_num_threads(saved);
}
BENCHMARK(BM_Repetitions)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
