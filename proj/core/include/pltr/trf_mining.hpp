#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "pltr/corpus.hpp"

namespace pltr {

/// Sentence-level 2x2 table for (feature present?, sentence in S_t?).
struct ContingencyTable {
  std::uint64_t present_in = 0;   // feature present, sentence in S_t
  std::uint64_t present_out = 0;  // feature present, sentence outside S_t
  std::uint64_t absent_in = 0;
  std::uint64_t absent_out = 0;

  std::uint64_t total() const { return present_in + present_out + absent_in + absent_out; }
};

/// Plug-in mutual information (nats) of the two binary variables in the table.
/// 0 log 0 terms vanish; a table with an empty marginal scores 0.
double plugin_mutual_information(const ContingencyTable& table);

/// Lowercased (ASCII) counting key for a surface token.
std::string feature_key(std::string_view surface);

/// Occurrence and presence counts of every feature, split by type membership.
/// Features are lowercased m-grams (m = 1 by default).
class TokenStats {
 public:
  struct Entry {
    std::uint64_t occurrences = 0;         // over the whole corpus
    std::uint64_t presence = 0;            // sentences containing the feature
    std::vector<std::uint64_t> occ_in;     // per type: occurrences inside S_t
    std::vector<std::uint64_t> presence_in;
    std::unordered_map<std::string, std::uint64_t> surfaces;
  };

  TokenStats() = default;
  TokenStats(std::vector<std::string> types, std::size_t ngram);

  /// Adds one sentence; `member_types` lists the type indices whose S_t holds it.
  void add_sentence(const Sentence& sentence, const std::vector<std::uint32_t>& member_types);
  /// Associative merge of counts gathered over a disjoint shard.
  void merge(const TokenStats& other);

  const std::vector<std::string>& types() const { return types_; }
  std::size_t type_index(std::string_view type) const;
  std::size_t ngram() const { return ngram_; }
  std::uint64_t sentence_count() const { return sentences_; }
  std::uint64_t member_count(std::size_t type) const { return members_[type]; }

  const Entry* find(std::string_view key) const;
  const std::unordered_map<std::string, Entry>& entries() const { return entries_; }

  std::uint64_t count_in(std::string_view key, std::size_t type) const;
  std::uint64_t count_out(std::string_view key, std::size_t type) const;
  ContingencyTable table(std::string_view key, std::size_t type) const;
  /// Most frequent surface form; ties go to the lexicographically smallest.
  std::string surface(std::string_view key) const;

 private:
  std::vector<std::string> types_;
  std::size_t ngram_ = 1;
  std::uint64_t sentences_ = 0;
  std::vector<std::uint64_t> members_;
  std::unordered_map<std::string, Entry> entries_;
};

/// Single pass over the corpus. With threads > 1 sentences are sharded and the
/// shard counts merged in shard order.
TokenStats accumulate_stats(const Corpus& corpus, const std::vector<TypeSentencePartition>& partitions,
                            std::size_t ngram = 1, std::size_t threads = 1);

double mutual_information(const TokenStats& stats, std::string_view token, std::string_view type);

struct TrfEntry {
  std::string token;  // emitted surface form
  std::string key;
  double mi = 0.0;
  double ratio = 0.0;
  std::uint64_t count_in = 0;
  std::uint64_t count_out = 0;

  friend bool operator==(const TrfEntry&, const TrfEntry&) = default;
};

/// A flattened TRF candidate pool R: every distinct feature with the type that owns it.
struct TrfPool {
  std::vector<std::string> tokens;       // sorted, unique
  std::vector<std::string> owner_types;  // aligned with tokens
  std::vector<double> owner_mi;          // MI under the owning type

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  std::optional<std::size_t> index_of(std::string_view token) const;
};

class TrfSet {
 public:
  TrfSet() = default;
  TrfSet(std::vector<std::string> types, std::vector<std::vector<TrfEntry>> lists, double rho, std::size_t l);

  const std::vector<std::string>& types() const { return types_; }
  const std::vector<TrfEntry>& features(std::size_t type) const { return lists_[type]; }
  const std::vector<TrfEntry>& features(std::string_view type) const;
  double rho() const { return rho_; }
  std::size_t l() const { return l_; }
  std::size_t total_features() const;

  /// Each token is owned by the type under which it has the highest MI
  /// (earlier type wins ties).
  TrfPool pool() const;

  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  static TrfSet from_json(const nlohmann::json& j);

  friend bool operator==(const TrfSet& a, const TrfSet& b) {
    return a.types_ == b.types_ && a.lists_ == b.lists_ && a.rho_ == b.rho_ && a.l_ == b.l_;
  }

 private:
  std::vector<std::string> types_;
  std::vector<std::vector<TrfEntry>> lists_;
  double rho_ = 3.0;
  std::size_t l_ = 120;
};

inline constexpr double kDefaultRho = 3.0;
inline constexpr std::size_t kDefaultTrfsPerType = 120;

/// Applies the frequency-ratio filter (count_in > 0, count_out / count_in <= rho),
/// ranks survivors by MI (then count_in, then key) and keeps the top l per type.
TrfSet extract_trfs(const TokenStats& stats, double rho, std::size_t l);
TrfSet extract_trfs(const Corpus& corpus, double rho = kDefaultRho, std::size_t l = kDefaultTrfsPerType,
                    std::size_t threads = 1);

}  // namespace pltr
