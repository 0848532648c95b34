#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pltr/corpus.hpp"

namespace pltr {

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kMaskToken = "[MASK]";

/// Word-level vocabulary. Ids 0..3 are reserved for [PAD] [UNK] [SEP] [MASK].
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kSep = 2;
  static constexpr int kMask = 3;

  Vocabulary();
  explicit Vocabulary(std::vector<std::string> tokens);

  /// Corpus tokens seen at least `min_count` times, then every `extra` token.
  /// Ids are assigned in lexicographic order after the reserved block.
  static Vocabulary build(const Corpus& corpus, const std::vector<std::string>& extra, std::size_t min_count = 1);

  int id(std::string_view token) const;  // [UNK] when absent
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(std::span<const std::string> tokens) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace pltr
