#include <benchmark/benchmark.h>

#include "plcattest/dataset.hpp"
#include "plcattest/learner.hpp"
#include "plcattest/plant.hpp"

using namespace plcattest;

static void BM_ScanStage1(benchmark::State& state) {
  const auto mp = plant::builtin_miniplant();
  const auto& prog = mp.programs.front();
  const auto in = stlang::default_inputs(prog);
  const auto lat = stlang::latches_from_input(prog, in);
  for (auto _ : state) benchmark::DoNotOptimize(stlang::scan(prog, in, lat));
}
BENCHMARK(BM_ScanStage1);

static void BM_Collect(benchmark::State& state) {
  const auto mp = plant::builtin_miniplant();
  const auto& prog = mp.programs.front();
  std::vector<std::string> features;
  for (const auto& i : stlang::list_inputs(prog)) features.push_back(i.ident);
  for (auto _ : state) benchmark::DoNotOptimize(dataset::collect(prog, features, static_cast<std::size_t>(state.range(0)), 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Collect)->Arg(1000)->Arg(10000);

static void BM_Nn2Forward(benchmark::State& state) {
  const auto n = state.range(0);
  const auto m = learner::init_model(learner::MlpSpec::nn2(14, 12), 1);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(14, n);
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(x));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Nn2Forward)->Arg(1)->Arg(64)->Arg(1024);

static void BM_Trace(benchmark::State& state) {
  const auto mp = plant::builtin_miniplant();
  const auto init = plant::builtin_initial_states().front();
  for (auto _ : state) benchmark::DoNotOptimize(plant::generate_trace(mp.programs, mp.config, init, 600.0, 1));
}
BENCHMARK(BM_Trace);
BENCHMARK_MAIN();
