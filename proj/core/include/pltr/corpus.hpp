#pragma once

#include <cstddef>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pltr/bioes.hpp"

namespace pltr {

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<EntityLabel> labels;
  std::string domain_id;

  std::size_t size() const { return tokens.size(); }
  std::vector<Span> spans() const { return decode_spans(labels); }

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

enum class Split { train, dev, test };

Split parse_split(std::string_view name);
std::string_view to_string(Split split);

/// Throws ValidationError unless the sentence is non-empty, aligned, and a valid BIOES walk.
void validate_sentence(const Sentence& sentence);

/// Immutable collection of labelled sentences.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Sentence> sentences, Split split = Split::train);

  const std::vector<Sentence>& sentences() const { return sentences_; }
  const Sentence& operator[](std::size_t i) const { return sentences_[i]; }
  std::size_t size() const { return sentences_.size(); }
  bool empty() const { return sentences_.empty(); }
  Split split() const { return split_; }

  /// Sorted list of every entity type that appears in the labels.
  const std::vector<std::string>& type_inventory() const { return types_; }
  std::size_t token_count() const;

  auto begin() const { return sentences_.begin(); }
  auto end() const { return sentences_.end(); }

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.split_ == b.split_ && a.sentences_ == b.sentences_;
  }

 private:
  std::vector<Sentence> sentences_;
  Split split_ = Split::train;
  std::vector<std::string> types_;
};

struct ConllOptions {
  TagScheme scheme = TagScheme::BIOES;
  bool repair = false;
  bool allow_empty = false;
  std::string domain_id;
  Split split = Split::train;
};

/// Column format: one token per line, label in the last column, blank line between
/// sentences. -DOCSTART- lines are skipped.
Corpus parse_conll(std::string_view text, const ConllOptions& options = {});
Corpus read_conll_file(const std::string& path, const ConllOptions& options = {});
std::string write_conll(const Corpus& corpus, TagScheme scheme = TagScheme::BIOES);

/// Line-delimited JSON: {"tokens": [...], "labels": [...], "domain_id": "..."} per line.
std::string to_jsonl(const Corpus& corpus);
Corpus parse_jsonl(std::string_view text, Split split = Split::train);

struct TypeSentencePartition {
  std::string entity_type;
  std::vector<std::size_t> members;
  std::vector<std::size_t> complement;
  bool flagged = false;  // no sentence carries this type
};

/// One partition per type in the corpus inventory.
std::vector<TypeSentencePartition> build_partitions(const Corpus& corpus);
/// One partition per listed type; unseen types are flagged with empty members.
std::vector<TypeSentencePartition> build_partitions(const Corpus& corpus, const std::vector<std::string>& types);

/// Labels of types outside `known_types` become O.
Corpus remap_ood_labels(const Corpus& corpus, const std::set<std::string>& known_types);

}  // namespace pltr
