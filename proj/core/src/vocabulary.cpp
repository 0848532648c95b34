#include "pltr/vocabulary.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "pltr/error.hpp"

namespace pltr {

Vocabulary::Vocabulary()
    : Vocabulary(std::vector<std::string>{std::string(kPadToken), std::string(kUnkToken), std::string(kSepToken),
                                          std::string(kMaskToken)}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 4 || tokens_[kPad] != kPadToken || tokens_[kUnk] != kUnkToken || tokens_[kSep] != kSepToken ||
      tokens_[kMask] != kMaskToken) {
    throw ValidationError("vocabulary must start with the reserved tokens");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw ValidationError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::build(const Corpus& corpus, const std::vector<std::string>& extra, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : corpus) {
    for (const auto& t : s.tokens) ++counts[t];
  }
  std::set<std::string> chosen;
  for (const auto& [token, n] : counts) {
    if (n >= min_count) chosen.insert(token);
  }
  chosen.insert(extra.begin(), extra.end());
  for (auto reserved : {kPadToken, kUnkToken, kSepToken, kMaskToken}) chosen.erase(std::string(reserved));

  Vocabulary vocab;
  std::vector<std::string> tokens = vocab.tokens_;
  tokens.insert(tokens.end(), chosen.begin(), chosen.end());
  return Vocabulary(std::move(tokens));
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.contains(std::string(token)); }

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) throw ValidationError("token id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

}  // namespace pltr
