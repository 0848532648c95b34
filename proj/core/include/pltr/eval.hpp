#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pltr/corpus.hpp"
#include "pltr/encoder.hpp"
#include "pltr/tagger.hpp"

namespace pltr {

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
  double f1() const {
    const double p = precision();
    const double r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
  std::size_t support() const { return tp + fn; }
};

/// Entity-level scores: exact span + type match, pooled over all sentences.
struct F1Report {
  Counts micro;
  std::map<std::string, Counts> per_type;

  double micro_f1() const { return micro.f1(); }
  nlohmann::json to_json() const;
};

using LabelSequences = std::vector<std::vector<EntityLabel>>;

F1Report micro_f1(const LabelSequences& predicted, const LabelSequences& gold);

struct LengthBucket {
  std::string name;  // "<25", "25-35", ">35"
  std::size_t sentences = 0;
  F1Report scores;
};

/// Buckets by original sentence token count; empty buckets are omitted.
std::vector<LengthBucket> length_buckets(const Corpus& gold, const LabelSequences& predicted);
std::string length_bucket_name(std::size_t tokens);

struct EvalReport {
  F1Report scores;
  std::size_t sentences = 0;
  std::vector<LengthBucket> buckets;
  std::optional<double> similarity;

  nlohmann::json to_json() const;
};

LabelSequences predict_all(const Tagger& tagger, const Corpus& corpus, std::size_t threads = 1);

EvalReport evaluate(const Tagger& tagger, const Corpus& corpus, std::size_t threads = 1);
/// Unknown gold types are mapped to O before scoring.
EvalReport evaluate_ood(const Tagger& tagger, const Corpus& ood, const std::set<std::string>& known_types,
                        std::size_t threads = 1);
std::vector<LengthBucket> length_bucket_report(const Tagger& tagger, const Corpus& corpus, std::size_t threads = 1);

inline constexpr std::size_t kMaxSimilarityPairs = 10000;

/// Produces the token sequence fed to the encoder for a sentence. The sentence
/// must come first; anything appended is context only and is not pooled.
using InputBuilder = std::function<std::vector<std::string>(const Sentence&)>;

/// Mean cosine similarity of final-layer vectors, mean-pooled over the sentence
/// positions, over cross-domain pairs (all pairs when there are at most
/// max_pairs, otherwise a seeded sample).
double similarity_report(const Encoder& encoder, const Corpus& domain_a, const Corpus& domain_b,
                         const InputBuilder& inputs, std::uint64_t seed = 0,
                         std::size_t max_pairs = kMaxSimilarityPairs);
double similarity_report(const Tagger& tagger, const Corpus& domain_a, const Corpus& domain_b, bool with_prompts,
                         std::uint64_t seed = 0, std::size_t max_pairs = kMaxSimilarityPairs);

}  // namespace pltr
