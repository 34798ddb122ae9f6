#pragma once
#include <iosfwd>
#include <string>
#include <vector>

#include "ctx/parser.hpp"

namespace ctx {

enum class BenchFamily { SharedPrefix, UniquePrefix };

struct BenchConfig {
  BenchFamily family = BenchFamily::SharedPrefix;
  int p = 1;      // generated operator count
  int depth = 1;  // nesting count
  int trials = 5;
};

// SharedPrefix: P operators "begin" _ "endK", each with its own assumption
// class carrying one distinct dummy instance operator. UniquePrefix: the same
// but with per-operator prefixes "beginK". The main block nests `depth`
// applications of the P-th operator.
std::string gen_benchmark(const BenchConfig& cfg);

struct BenchRow {
  std::string family;
  int p = 0;
  int depth = 0;
  long long languages = 0;
  long long memo_entries = 0;
  long long time_ns = 0;
  bool ok = true;
};

// Compiles one generated program and reports entry-session statistics with
// the median wall time over cfg.trials runs.
BenchRow bench_point(const BenchConfig& cfg);

// CSV columns: family,P,depth,L,memo_entries,time_ns. with_time=false omits
// the time column for byte-stable output.
void write_csv(std::ostream& os, const std::vector<BenchRow>& rows,
               bool with_time);

std::vector<BenchRow> run_bench(const std::vector<BenchConfig>& grid);

}  // namespace ctx
