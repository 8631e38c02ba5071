#include <benchmark/benchmark.h>

#include <sstream>
#include <vector>

#include "blockflow/dsl.hpp"
#include "blockflow/kernels.hpp"
#include "blockflow/lowering.hpp"
#include "blockflow/matrix.hpp"
#include "blockflow/scheduler.hpp"
#include "blockflow/session.hpp"
#include "blockflow/timemodel.hpp"
#include "blockflow/workloads.hpp"

namespace {

using namespace blockflow;

void BM_MatmulKernel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> v(n * n);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i % 17) / 17.0;
  Matrix a = make_matrix(Precision::Single, n, n, 4, v);
  const Matrix* ops[] = {&a, &a};
  for (auto _ : state) benchmark::DoNotOptimize(execute_block_op(Opcode::MMul, ops));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_MatmulKernel)->Arg(32)->Arg(96);

LoweredGraph lowered_product(std::size_t n) {
  LoweredGraph g;
  BlockGrid a = lower_constant(g, 1, {n, n}, 4, 9216);
  BlockGrid b = lower_constant(g, 2, {n, n}, 4, 9216);
  lower_matmul(g, 3, a, b);
  return g;
}

void BM_LowerMatmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(lowered_product(n));
}
BENCHMARK(BM_LowerMatmul)->Arg(960)->Arg(2880);

void BM_HeuristicSchedule(benchmark::State& state) {
  const LoweredGraph g = lowered_product(static_cast<std::size_t>(state.range(0)));
  const CostedGraph c = build_costed_graph(g, default_time_model());
  for (auto _ : state) benchmark::DoNotOptimize(heuristic_schedule(c, 8));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c.size()));
}
BENCHMARK(BM_HeuristicSchedule)->Arg(960)->Arg(2880);

void BM_RunChains(benchmark::State& state) {
  const Program program = parse_script(synth_chains_script(8, 4, 96));
  SessionConfig config;
  config.engine.workers = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    Session session(config);
    std::ostringstream out;
    run_program(program, session, out);
    benchmark::DoNotOptimize(out.str());
  }
}
BENCHMARK(BM_RunChains)->Arg(1)->Arg(4)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
