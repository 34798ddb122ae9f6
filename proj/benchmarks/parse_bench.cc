#include <benchmark/benchmark.h>

#include "ctx/loader.hpp"

namespace {

std::string synthetic_program(int classes) {
  std::string s;
  for (int i = 0; i < classes; i++) {
    s += "dsl D" + std::to_string(i) + " {\n";
    s += "  static Int \"op" + std::to_string(i) + "\" _ (Int x) { return x; }\n";
    s += "}\n";
  }
  s += "main { println(\"x\"); }\n";
  return s;
}

void BM_ReadProgram(benchmark::State& state) {
  std::string text = synthetic_program((int)state.range(0));
  for (auto _ : state) {
    auto r = ctx::read_program(text, "bench.ctx");
    benchmark::DoNotOptimize(r.program);
  }
  state.SetBytesProcessed(state.iterations() * (long)text.size());
}
BENCHMARK(BM_ReadProgram)->Arg(4)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
