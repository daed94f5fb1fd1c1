#include <benchmark/benchmark.h>

#include "grace/diffing.h"
#include "grace/evaluation.h"
#include "grace/prompting.h"
#include "grace/random.h"
#include "grace/tokenizer.h"

namespace {

using namespace grace;

Lines synthetic_file(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed, "bench");
  Lines out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back("    var x" + std::to_string(uniform_index(rng, 50)) + " = Call(a" + std::to_string(i) +
                  ", \"lit\") + 42;");
  }
  return out;
}

Version edited(const Lines& base, std::size_t every) {
  Lines v = base;
  for (std::size_t i = 0; i < v.size(); i += every) v[i] += " // touched";
  return Version(v);
}

void BM_DiffVersions(benchmark::State& state) {
  const Lines base = synthetic_file(static_cast<std::size_t>(state.range(0)), 1);
  const Version a(base);
  const Version b = edited(base, 37);
  for (auto _ : state) benchmark::DoNotOptimize(diff_versions(a, b));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DiffVersions)->Arg(200)->Arg(2000)->Arg(10000);

void BM_Tokenize(benchmark::State& state) {
  const Lines lines = synthetic_file(1000, 2);
  for (auto _ : state) {
    for (const auto& l : lines) benchmark::DoNotOptimize(tokenize(l));
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_Tokenize);

Example bench_example(std::size_t ctx) {
  const Lines base = synthetic_file(400, 3);
  const auto edits = diff_versions(Version(base), edited(base, 20));
  Example ex;
  ex.id = "bench";
  ex.current = edits.back();
  ex.ctx_edits.assign(edits.begin(), edits.begin() + static_cast<std::ptrdiff_t>(std::min(ctx, edits.size() - 1)));
  return ex;
}

void BM_TagPrompt(benchmark::State& state) {
  const Example ex = bench_example(static_cast<std::size_t>(state.range(0)));
  const TokenBudget budget{static_cast<std::size_t>(state.range(1)), nullptr};
  for (auto _ : state) benchmark::DoNotOptimize(build_tag_prompt(ex, budget));
}
BENCHMARK(BM_TagPrompt)->Args({3, 1 << 20})->Args({15, 1024})->Args({15, 256});

void BM_ExactMatch(benchmark::State& state) {
  const Lines a = synthetic_file(20, 4);
  Lines b = a;
  for (auto& l : b) l = "  " + l + "  ";
  for (auto _ : state) benchmark::DoNotOptimize(exact_match(a, b));
}
BENCHMARK(BM_ExactMatch);

}  // namespace

BENCHMARK_MAIN();
