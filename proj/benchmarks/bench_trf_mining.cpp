#include <benchmark/benchmark.h>

#include <random>

#include "pltr/bioes.hpp"
#include "pltr/corpus.hpp"
#include "pltr/trf_mining.hpp"

namespace {

// Zipf-distributed tokens with one entity per sentence; mirrors real NER token statistics.
pltr::Corpus zipf_corpus(std::size_t tokens) {
  std::mt19937_64 rng(1);
  std::vector<double> w(5000);
  for (std::size_t r = 0; r < w.size(); ++r) w[r] = 1.0 / static_cast<double>(r + 1);
  std::discrete_distribution<std::size_t> word(w.begin(), w.end());
  const std::vector<std::string> types{"LOC", "MISC", "ORG", "PER"};
  std::vector<pltr::Sentence> out;
  for (std::size_t total = 0; total < tokens;) {
    pltr::Sentence s;
    const std::size_t n = 10 + rng() % 21;
    for (std::size_t i = 0; i < n; ++i) s.tokens.push_back("w" + std::to_string(word(rng)));
    s.labels = pltr::encode_spans({{1, 2, types[rng() % types.size()]}}, n);
    total += n;
    out.push_back(std::move(s));
  }
  return pltr::Corpus(std::move(out));
}

void BM_AccumulateStats(benchmark::State& state) {
  const auto corpus = zipf_corpus(static_cast<std::size_t>(state.range(0)));
  const auto partitions = pltr::build_partitions(corpus);
  for (auto _ : state) benchmark::DoNotOptimize(pltr::accumulate_stats(corpus, partitions));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(corpus.token_count()));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AccumulateStats)->RangeMultiplier(2)->Range(25000, 400000)->Unit(benchmark::kMillisecond)->Complexity();

void BM_ExtractTrfs(benchmark::State& state) {
  const auto corpus = zipf_corpus(100000);
  const auto stats = pltr::accumulate_stats(corpus, pltr::build_partitions(corpus));
  for (auto _ : state) benchmark::DoNotOptimize(pltr::extract_trfs(stats, 3.0, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_ExtractTrfs)->Arg(30)->Arg(120)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
