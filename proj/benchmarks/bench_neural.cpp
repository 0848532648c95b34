#include <benchmark/benchmark.h>

#include "pltr/encoder.hpp"
#include "pltr/losses.hpp"
#include "pltr/training.hpp"

namespace {

pltr::EncoderModel desk_model() {
  std::vector<std::string> words{"[PAD]", "[UNK]", "[SEP]", "[MASK]"};
  for (int i = 0; i < 500; ++i) words.push_back("w" + std::to_string(i));
  return pltr::EncoderModel(pltr::TrainConfig::desk_profile().model, pltr::Vocabulary(words),
                            pltr::TagSet({"LOC", "MISC", "ORG", "PER"}));
}

std::vector<int> ids_of(const pltr::EncoderModel& m, std::size_t n) {
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < n; ++i) tokens.push_back("w" + std::to_string(i * 7 % 500));
  return m.vocab().encode(tokens);
}

void BM_Forward(benchmark::State& state) {
  const auto model = desk_model();
  const auto ids = ids_of(model, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(ids));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->RangeMultiplier(2)->Range(8, 128);

// One tagging step: forward, loss, backward.
void BM_TagStep(benchmark::State& state) {
  const auto model = desk_model();
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto ids = ids_of(model, n);
  const std::vector<int> gold(n, 0);
  for (auto _ : state) benchmark::DoNotOptimize(model.gradients(pltr::tag_loss(model, model.forward(ids), gold)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TagStep)->RangeMultiplier(2)->Range(8, 128);

}  // namespace

BENCHMARK_MAIN();
