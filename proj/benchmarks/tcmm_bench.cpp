#include "tcmm/builder.h"
#include "tcmm/pipeline.h"
#include "tcmm/simulator.h"
#include "tcmm/text.h"

#include <benchmark/benchmark.h>

using namespace tcmm;

namespace {

RunConfig config(int64_t size) {
  RunConfig rc;
  rc.problem = {size, size, size, ElemType::F32};
  rc.tiles = TileConfig{};
  rc.emit = EmitKind::None;
  return rc;
}

Module lowered(const RunConfig &rc) {
  return runPasses(buildNaiveMatmul(rc.problem), rc).module;
}

} // namespace

// Whole pass pipeline, no simulation.
static void BM_Lower(benchmark::State &state) {
  RunConfig rc = config(state.range(0));
  Module naive = buildNaiveMatmul(rc.problem);
  for (auto _ : state)
    benchmark::DoNotOptimize(runPasses(naive, rc).module);
}
BENCHMARK(BM_Lower)->Arg(128)->Arg(1024)->Unit(benchmark::kMillisecond);

// One pass at a time, on its real input.
static void BM_Pass(benchmark::State &state) {
  RunConfig rc = config(256);
  const std::string &name = passNames()[state.range(0)];
  Module in = buildNaiveMatmul(rc.problem);
  for (const std::string &p : passNames()) {
    if (p == name)
      break;
    in = applyPass(p, in, rc).module;
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(applyPass(name, in, rc).module);
  state.SetLabel(name);
}
BENCHMARK(BM_Pass)->DenseRange(0, 14)->Unit(benchmark::kMicrosecond);

static void BM_PrintParse(benchmark::State &state) {
  Module k = lowered(config(256));
  for (auto _ : state)
    benchmark::DoNotOptimize(parseModule(printModule(k)));
}
BENCHMARK(BM_PrintParse)->Unit(benchmark::kMicrosecond);

static void BM_Sequential(benchmark::State &state) {
  RunConfig rc = config(state.range(0));
  Module naive = buildNaiveMatmul(rc.problem);
  Buffers in = randomInputs(naive, 0);
  for (auto _ : state)
    benchmark::DoNotOptimize(runSequential(naive, in));
  state.SetItemsProcessed(state.iterations() * state.range(0) *
                          state.range(0) * state.range(0));
}
BENCHMARK(BM_Sequential)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_Gpu(benchmark::State &state) {
  RunConfig rc = config(state.range(0));
  Module k = lowered(rc);
  Buffers in = randomInputs(k, 0);
  for (auto _ : state)
    benchmark::DoNotOptimize(runGpu(k, in));
  state.SetItemsProcessed(state.iterations() * state.range(0) *
                          state.range(0) * state.range(0));
}
BENCHMARK(BM_Gpu)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_PhaseConflicts(benchmark::State &state) {
  std::vector<int64_t> addrs(32);
  for (int i = 0; i < 32; ++i)
    addrs[i] = i * state.range(0);
  for (auto _ : state)
    benchmark::DoNotOptimize(phaseConflicts(addrs, 4));
}
BENCHMARK(BM_PhaseConflicts)->Arg(4)->Arg(128);
BENCHMARK_MAIN();
