#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pltr/corpus.hpp"
#include "pltr/encoder.hpp"
#include "pltr/trf_mining.hpp"

namespace pltr {

inline constexpr std::size_t kDefaultSelectedTrfs = 40;
inline constexpr std::size_t kDeskSelectedTrfs = 5;

/// Literal words between [SEP] and the mask slots of the selection prompt.
inline const std::vector<std::string>& selection_prompt_literals() {
  static const std::vector<std::string> words{"type-related", "features:"};
  return words;
}

/// x ++ [SEP] ++ "type-related features:" ++ K x [MASK]
struct SelectionPrompt {
  std::vector<std::string> tokens;
  std::vector<std::size_t> mask_positions;
  std::size_t sentence_length = 0;
};

SelectionPrompt build_selection_prompt(const Sentence& x, std::size_t k);

/// Restricted-softmax fill probabilities over the pool, aligned with pool.tokens.
struct FillDistribution {
  std::vector<std::string> tokens;
  std::vector<double> probabilities;

  std::size_t argmax() const;  // ties go to the lexicographically smallest token
};

FillDistribution fill_distribution(std::span<const double> hidden, const TrfPool& pool, const Encoder& encoder);

struct SelectedTrfs {
  std::vector<std::string> tokens;  // unique, in mask order
  std::vector<double> probabilities;  // winning probability of each token
  std::vector<std::pair<std::string, std::vector<std::string>>> by_type;  // owner type -> tokens

  const std::vector<std::string>* for_type(const std::string& type) const;
};

/// Groups tokens by their owning type (order of first appearance within each type).
std::vector<std::pair<std::string, std::vector<std::string>>> group_by_owner(const std::vector<std::string>& tokens,
                                                                             const TrfPool& pool);

/// Selection from an already encoded selection prompt.
SelectedTrfs select_from_output(const ForwardOutput& out, const TrfPool& pool, const Encoder& encoder);
SelectedTrfs select_relevant_trfs(const Sentence& x, const TrfPool& pool, std::size_t k, const Encoder& encoder);

struct PhiLabels {
  std::vector<std::string> tokens;  // exactly K, nondecreasing distance
  std::vector<double> distances;
};

/// Each pool token is scored by its minimum Euclidean distance (static embeddings)
/// to any sentence token; the K closest are returned, padded with the last one when
/// the pool has fewer than K entries.
PhiLabels phi_labels(const Sentence& x, const TrfPool& pool, std::size_t k, const Encoder& encoder);

/// f'(x): "x [SEP] T1: a, b [SEP] T2: c". Types with no selected TRF are omitted.
struct EntityPrompt {
  std::vector<std::string> tokens;  // model input tokens
  std::string rendered;
  std::size_t sentence_length = 0;
  std::vector<std::pair<std::string, std::vector<std::string>>> grouping;
};

EntityPrompt build_entity_prompt(const Sentence& x, const SelectedTrfs& selected,
                                 const std::vector<std::string>& inventory);
EntityPrompt build_entity_prompt(const std::vector<std::string>& sentence_tokens,
                                 const std::vector<std::pair<std::string, std::vector<std::string>>>& grouping,
                                 const std::vector<std::string>& inventory);

struct ParsedEntityPrompt {
  std::vector<std::string> sentence_tokens;
  std::vector<std::pair<std::string, std::vector<std::string>>> grouping;
};

ParsedEntityPrompt parse_entity_prompt(std::string_view rendered);

/// One prompted example, serialized as a JSONL record
/// {tokens, labels, selected: {type: [trf]}, phi: [trf], rendered_prompt}.
struct PromptedExample {
  Sentence sentence;
  SelectedTrfs selected;
  PhiLabels phi;
  EntityPrompt prompt;

  nlohmann::json to_json() const;
};

/// Vocabulary additions every prompted model needs (template literals, type names, separators).
std::vector<std::string> prompt_vocabulary(const std::vector<std::string>& types);

}  // namespace pltr
