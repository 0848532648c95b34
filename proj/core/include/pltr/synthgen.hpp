#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pltr/corpus.hpp"

namespace pltr {

/// Knobs of the synthetic two-domain benchmark.
struct SynthSpec {
  std::vector<std::string> types{"PER", "LOC", "ORG", "MISC"};
  std::size_t entities_per_type = 120;  // lexicon size per type and domain
  double shift = 0.9;                   // 0: identical entity lexicons, 1: disjoint
  std::size_t cues_per_type = 6;
  std::size_t background_vocab = 300;
  double zipf_exponent = 1.0;
  std::size_t min_length = 8;
  std::size_t max_length = 20;
  std::size_t max_entity_length = 1;
  double second_entity_prob = 0.3;
  double cue_prob = 0.9;
  std::size_t train_per_type = 100;
  std::size_t dev_per_type = 25;
  std::size_t test_per_type = 50;
  std::size_t target_per_type = 50;
  std::uint64_t seed = 7;

  void validate() const;
  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
};

struct SynthBenchmark {
  Corpus source_train;
  Corpus source_dev;
  Corpus source_test;
  Corpus target_dev;
  Corpus target_test;
  std::map<std::string, std::vector<std::string>> cues;  // planted cue words per type
  double entity_overlap = 0.0;                           // measured on generated corpora

  /// Manifest written next to the CoNLL files: cues, spec and measured overlap.
  nlohmann::json manifest(const SynthSpec& spec) const;
};

SynthBenchmark generate(const SynthSpec& spec);

/// Fraction of distinct target entity tokens that also occur inside source entities.
double entity_overlap(const Corpus& source, const Corpus& target);

/// Bisection on `shift` until the measured overlap is within `tolerance` of `target`.
/// Returns the adjusted spec.
SynthSpec calibrate_shift(SynthSpec spec, double target, double tolerance = 0.01);

}  // namespace pltr
