#include "pltr/trf_mining.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "pltr/error.hpp"
#include "pltr/log.hpp"

namespace pltr {

double plugin_mutual_information(const ContingencyTable& t) {
  const double n = static_cast<double>(t.total());
  if (n <= 0.0) return 0.0;
  const double present = static_cast<double>(t.present_in + t.present_out);
  const double absent = static_cast<double>(t.absent_in + t.absent_out);
  const double in = static_cast<double>(t.present_in + t.absent_in);
  const double out = static_cast<double>(t.present_out + t.absent_out);
  if (present == 0.0 || absent == 0.0 || in == 0.0 || out == 0.0) return 0.0;

  auto term = [n](double joint, double row, double col) {
    if (joint == 0.0) return 0.0;
    return (joint / n) * std::log((joint * n) / (row * col));
  };
  const double mi = term(static_cast<double>(t.present_in), present, in) +
                    term(static_cast<double>(t.present_out), present, out) +
                    term(static_cast<double>(t.absent_in), absent, in) +
                    term(static_cast<double>(t.absent_out), absent, out);
  return std::max(mi, 0.0);
}

std::string feature_key(std::string_view surface) {
  std::string key(surface);
  for (char& c : key) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return key;
}

TokenStats::TokenStats(std::vector<std::string> types, std::size_t ngram)
    : types_(std::move(types)), ngram_(ngram), members_(types_.size(), 0) {
  if (ngram_ == 0) throw ValidationError("n-gram order must be >= 1");
}

std::size_t TokenStats::type_index(std::string_view type) const {
  auto it = std::find(types_.begin(), types_.end(), type);
  if (it == types_.end()) throw ValidationError("unknown entity type '" + std::string(type) + "'");
  return static_cast<std::size_t>(it - types_.begin());
}

void TokenStats::add_sentence(const Sentence& sentence, const std::vector<std::uint32_t>& member_types) {
  ++sentences_;
  for (auto t : member_types) ++members_[t];
  if (sentence.size() < ngram_) return;

  std::vector<std::pair<std::string, std::string>> grams;  // (key, surface)
  grams.reserve(sentence.size() - ngram_ + 1);
  for (std::size_t p = 0; p + ngram_ <= sentence.size(); ++p) {
    std::string surface = sentence.tokens[p];
    for (std::size_t k = 1; k < ngram_; ++k) {
      surface += ' ';
      surface += sentence.tokens[p + k];
    }
    grams.emplace_back(feature_key(surface), std::move(surface));
  }
  std::sort(grams.begin(), grams.end());

  for (std::size_t i = 0; i < grams.size();) {
    std::size_t j = i;
    auto [it, inserted] = entries_.try_emplace(grams[i].first);
    Entry& e = it->second;
    if (inserted) {
      e.occ_in.assign(types_.size(), 0);
      e.presence_in.assign(types_.size(), 0);
    }
    while (j < grams.size() && grams[j].first == grams[i].first) {
      ++e.surfaces[grams[j].second];
      ++j;
    }
    const auto count = static_cast<std::uint64_t>(j - i);
    e.occurrences += count;
    ++e.presence;
    for (auto t : member_types) {
      e.occ_in[t] += count;
      ++e.presence_in[t];
    }
    i = j;
  }
}

void TokenStats::merge(const TokenStats& other) {
  if (other.types_ != types_ || other.ngram_ != ngram_) throw ValidationError("cannot merge incompatible stats");
  sentences_ += other.sentences_;
  for (std::size_t t = 0; t < members_.size(); ++t) members_[t] += other.members_[t];
  for (const auto& [key, src] : other.entries_) {
    auto [it, inserted] = entries_.try_emplace(key);
    Entry& dst = it->second;
    if (inserted) {
      dst.occ_in.assign(types_.size(), 0);
      dst.presence_in.assign(types_.size(), 0);
    }
    dst.occurrences += src.occurrences;
    dst.presence += src.presence;
    for (std::size_t t = 0; t < types_.size(); ++t) {
      dst.occ_in[t] += src.occ_in[t];
      dst.presence_in[t] += src.presence_in[t];
    }
    for (const auto& [surface, n] : src.surfaces) dst.surfaces[surface] += n;
  }
}

const TokenStats::Entry* TokenStats::find(std::string_view key) const {
  auto it = entries_.find(std::string(key));
  return it == entries_.end() ? nullptr : &it->second;
}

std::uint64_t TokenStats::count_in(std::string_view key, std::size_t type) const {
  const Entry* e = find(key);
  return e ? e->occ_in[type] : 0;
}

std::uint64_t TokenStats::count_out(std::string_view key, std::size_t type) const {
  const Entry* e = find(key);
  return e ? e->occurrences - e->occ_in[type] : 0;
}

ContingencyTable TokenStats::table(std::string_view key, std::size_t type) const {
  ContingencyTable t;
  const Entry* e = find(key);
  if (e) {
    t.present_in = e->presence_in[type];
    t.present_out = e->presence - e->presence_in[type];
  }
  t.absent_in = members_[type] - t.present_in;
  t.absent_out = (sentences_ - members_[type]) - t.present_out;
  return t;
}

std::string TokenStats::surface(std::string_view key) const {
  const Entry* e = find(key);
  if (!e) return std::string(key);
  const std::string* best = nullptr;
  std::uint64_t best_n = 0;
  for (const auto& [s, n] : e->surfaces) {
    if (!best || n > best_n || (n == best_n && s < *best)) {
      best = &s;
      best_n = n;
    }
  }
  return *best;
}

TokenStats accumulate_stats(const Corpus& corpus, const std::vector<TypeSentencePartition>& partitions,
                            std::size_t ngram, std::size_t threads) {
  std::vector<std::string> types;
  types.reserve(partitions.size());
  std::vector<std::vector<std::uint32_t>> membership(corpus.size());
  for (std::size_t t = 0; t < partitions.size(); ++t) {
    types.push_back(partitions[t].entity_type);
    if (partitions[t].members.size() + partitions[t].complement.size() != corpus.size()) {
      throw ValidationError("partition for '" + partitions[t].entity_type + "' does not cover the corpus");
    }
    for (auto i : partitions[t].members) {
      if (i >= corpus.size()) throw ValidationError("partition index out of range");
      membership[i].push_back(static_cast<std::uint32_t>(t));
    }
  }

  threads = std::max<std::size_t>(1, std::min(threads, corpus.size()));
  if (threads == 1) {
    TokenStats stats(types, ngram);
    for (std::size_t i = 0; i < corpus.size(); ++i) stats.add_sentence(corpus[i], membership[i]);
    return stats;
  }

  std::vector<TokenStats> shards(threads, TokenStats(types, ngram));
  {
    std::vector<std::jthread> workers;
    const std::size_t chunk = (corpus.size() + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
      workers.emplace_back([&, w] {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(corpus.size(), lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) shards[w].add_sentence(corpus[i], membership[i]);
      });
    }
  }
  TokenStats stats(types, ngram);
  for (const auto& shard : shards) stats.merge(shard);
  return stats;
}

double mutual_information(const TokenStats& stats, std::string_view token, std::string_view type) {
  if (stats.sentence_count() < 2) throw ValidationError("mutual information needs at least 2 sentences");
  return plugin_mutual_information(stats.table(feature_key(token), stats.type_index(type)));
}

std::optional<std::size_t> TrfPool::index_of(std::string_view token) const {
  auto it = std::lower_bound(tokens.begin(), tokens.end(), token);
  if (it == tokens.end() || *it != token) return std::nullopt;
  return static_cast<std::size_t>(it - tokens.begin());
}

TrfSet::TrfSet(std::vector<std::string> types, std::vector<std::vector<TrfEntry>> lists, double rho, std::size_t l)
    : types_(std::move(types)), lists_(std::move(lists)), rho_(rho), l_(l) {
  if (types_.size() != lists_.size()) throw ValidationError("TrfSet needs one feature list per type");
}

const std::vector<TrfEntry>& TrfSet::features(std::string_view type) const {
  auto it = std::find(types_.begin(), types_.end(), type);
  if (it == types_.end()) throw ValidationError("TrfSet has no type '" + std::string(type) + "'");
  return lists_[static_cast<std::size_t>(it - types_.begin())];
}

std::size_t TrfSet::total_features() const {
  std::size_t n = 0;
  for (const auto& list : lists_) n += list.size();
  return n;
}

TrfPool TrfSet::pool() const {
  struct Owner {
    std::size_t type;
    double mi;
  };
  std::vector<std::pair<std::string, Owner>> all;
  for (std::size_t t = 0; t < lists_.size(); ++t) {
    for (const auto& e : lists_[t]) all.push_back({e.token, {t, e.mi}});
  }
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  TrfPool pool;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    Owner best = all[i].second;
    for (; j < all.size() && all[j].first == all[i].first; ++j) {
      const Owner& o = all[j].second;
      if (o.mi > best.mi || (o.mi == best.mi && o.type < best.type)) best = o;
    }
    pool.tokens.push_back(all[i].first);
    pool.owner_types.push_back(types_[best.type]);
    pool.owner_mi.push_back(best.mi);
    i = j;
  }
  return pool;
}

nlohmann::json TrfSet::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t t = 0; t < types_.size(); ++t) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& e : lists_[t]) {
      list.push_back({{"token", e.token},
                      {"mi", e.mi},
                      {"ratio", e.ratio},
                      {"count_in", e.count_in},
                      {"count_out", e.count_out}});
    }
    j[types_[t]] = std::move(list);
  }
  j["rho"] = rho_;
  j["l"] = l_;
  return j;
}

TrfSet TrfSet::from_json(const nlohmann::json& j) {
  try {
    std::vector<std::string> types;
    std::vector<std::vector<TrfEntry>> lists;
    for (const auto& [name, value] : j.items()) {
      if (name == "rho" || name == "l") continue;
      types.push_back(name);
      std::vector<TrfEntry> list;
      for (const auto& item : value) {
        TrfEntry e;
        e.token = item.at("token").get<std::string>();
        e.key = feature_key(e.token);
        e.mi = item.at("mi").get<double>();
        e.ratio = item.at("ratio").get<double>();
        e.count_in = item.at("count_in").get<std::uint64_t>();
        e.count_out = item.at("count_out").get<std::uint64_t>();
        list.push_back(std::move(e));
      }
      lists.push_back(std::move(list));
    }
    return TrfSet(std::move(types), std::move(lists), j.at("rho").get<double>(), j.at("l").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed TRF set: ") + e.what());
  }
}

TrfSet extract_trfs(const TokenStats& stats, double rho, std::size_t l) {
  if (!(rho >= 1.0)) throw ValidationError("rho must be >= 1");
  if (l < 1) throw ValidationError("l must be >= 1");

  std::vector<std::vector<TrfEntry>> lists(stats.types().size());
  std::vector<std::string> warnings;
  for (std::size_t t = 0; t < stats.types().size(); ++t) {
    std::vector<TrfEntry> candidates;
    for (const auto& [key, entry] : stats.entries()) {
      const std::uint64_t in = entry.occ_in[t];
      if (in == 0) continue;
      const std::uint64_t out = entry.occurrences - in;
      const double ratio = static_cast<double>(out) / static_cast<double>(in);
      if (!(ratio <= rho)) continue;
      TrfEntry e;
      e.key = key;
      e.token = stats.surface(key);
      // Snapped to a 1e-12 grid so mathematically equal scores (mirror-image tables)
      // tie exactly and fall through to the count_in / key tie-break.
      e.mi = std::round(plugin_mutual_information(stats.table(key, t)) * 1e12) / 1e12;
      e.ratio = ratio;
      e.count_in = in;
      e.count_out = out;
      candidates.push_back(std::move(e));
    }
    std::sort(candidates.begin(), candidates.end(), [](const TrfEntry& a, const TrfEntry& b) {
      if (a.mi != b.mi) return a.mi > b.mi;
      if (a.count_in != b.count_in) return a.count_in > b.count_in;
      return a.key < b.key;
    });
    if (candidates.size() > l) candidates.resize(l);
    if (candidates.empty()) {
      warnings.push_back("no qualifying type-related features for type '" + stats.types()[t] + "'");
      log::warn("trf.empty_type", {{"type", stats.types()[t]}});
    }
    lists[t] = std::move(candidates);
  }
  TrfSet set(stats.types(), std::move(lists), rho, l);
  set.warnings = std::move(warnings);
  return set;
}

TrfSet extract_trfs(const Corpus& corpus, double rho, std::size_t l, std::size_t threads) {
  const auto partitions = build_partitions(corpus);
  return extract_trfs(accumulate_stats(corpus, partitions, 1, threads), rho, l);
}

}  // namespace pltr
