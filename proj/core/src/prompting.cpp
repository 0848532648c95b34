#include "pltr/prompting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pltr/error.hpp"
#include "pltr/vocabulary.hpp"

namespace pltr {
namespace {

constexpr std::string_view kSegmentSeparator = " [SEP] ";

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

SelectionPrompt build_selection_prompt(const Sentence& x, std::size_t k) {
  if (k < 1) throw ValidationError("K must be >= 1");
  SelectionPrompt prompt;
  prompt.sentence_length = x.size();
  prompt.tokens = x.tokens;
  prompt.tokens.emplace_back(kSepToken);
  for (const auto& w : selection_prompt_literals()) prompt.tokens.push_back(w);
  for (std::size_t i = 0; i < k; ++i) {
    prompt.mask_positions.push_back(prompt.tokens.size());
    prompt.tokens.emplace_back(kMaskToken);
  }
  return prompt;
}

std::size_t FillDistribution::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probabilities.size(); ++i) {
    if (probabilities[i] > probabilities[best] ||
        (probabilities[i] == probabilities[best] && tokens[i] < tokens[best])) {
      best = i;
    }
  }
  return best;
}

FillDistribution fill_distribution(std::span<const double> hidden, const TrfPool& pool, const Encoder& encoder) {
  if (pool.empty()) throw ValidationError("mask-fill distribution over an empty TRF pool");
  FillDistribution dist;
  dist.tokens = pool.tokens;
  dist.probabilities.resize(pool.size());
  for (std::size_t r = 0; r < pool.size(); ++r) {
    const auto e = encoder.token_embedding(pool.tokens[r]);
    if (e.size() != hidden.size()) throw ValidationError("embedding and hidden sizes differ");
    dist.probabilities[r] = std::inner_product(e.begin(), e.end(), hidden.begin(), 0.0);
  }
  const double mx = *std::max_element(dist.probabilities.begin(), dist.probabilities.end());
  double sum = 0.0;
  for (double& p : dist.probabilities) {
    p = std::exp(p - mx);
    sum += p;
  }
  for (double& p : dist.probabilities) p /= sum;
  return dist;
}

const std::vector<std::string>* SelectedTrfs::for_type(const std::string& type) const {
  for (const auto& [t, tokens] : by_type) {
    if (t == type) return &tokens;
  }
  return nullptr;
}

std::vector<std::pair<std::string, std::vector<std::string>>> group_by_owner(const std::vector<std::string>& tokens,
                                                                             const TrfPool& pool) {
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;
  for (const auto& token : tokens) {
    const auto idx = pool.index_of(token);
    if (!idx) throw ValidationError("selected token '" + token + "' is not in the TRF pool");
    const auto& owner = pool.owner_types[*idx];
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == owner; });
    if (it == groups.end()) {
      groups.push_back({owner, {token}});
    } else {
      it->second.push_back(token);
    }
  }
  return groups;
}

SelectedTrfs select_from_output(const ForwardOutput& out, const TrfPool& pool, const Encoder& encoder) {
  SelectedTrfs selected;
  for (auto pos : out.mask_positions) {
    const auto dist = fill_distribution(out.hidden_at(pos), pool, encoder);
    const auto best = dist.argmax();
    const auto& token = dist.tokens[best];
    if (std::find(selected.tokens.begin(), selected.tokens.end(), token) != selected.tokens.end()) continue;
    selected.tokens.push_back(token);
    selected.probabilities.push_back(dist.probabilities[best]);
  }
  selected.by_type = group_by_owner(selected.tokens, pool);
  return selected;
}

SelectedTrfs select_relevant_trfs(const Sentence& x, const TrfPool& pool, std::size_t k, const Encoder& encoder) {
  const auto prompt = build_selection_prompt(x, k);
  return select_from_output(encoder.encode(prompt.tokens), pool, encoder);
}

PhiLabels phi_labels(const Sentence& x, const TrfPool& pool, std::size_t k, const Encoder& encoder) {
  if (pool.empty()) throw ValidationError("phi labels need a non-empty TRF pool");
  if (k < 1) throw ValidationError("K must be >= 1");
  std::vector<std::vector<double>> sentence_emb;
  sentence_emb.reserve(x.size());
  for (const auto& t : x.tokens) sentence_emb.push_back(encoder.token_embedding(t));

  // Equal distances (typically several TRFs literally present in x) resolve to the most
  // type-related TRF first, then by token string.
  struct Scored {
    double distance;
    std::size_t r;
  };
  std::vector<Scored> scored;
  scored.reserve(pool.size());
  for (std::size_t r = 0; r < pool.size(); ++r) {
    const auto e = encoder.token_embedding(pool.tokens[r]);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : sentence_emb) best = std::min(best, squared_distance(e, s));
    scored.push_back({std::sqrt(best), r});
  }
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                    [&](const Scored& a, const Scored& b) {
                      if (a.distance != b.distance) return a.distance < b.distance;
                      const double mi_a = pool.owner_mi.empty() ? 0.0 : pool.owner_mi[a.r];
                      const double mi_b = pool.owner_mi.empty() ? 0.0 : pool.owner_mi[b.r];
                      if (mi_a != mi_b) return mi_a > mi_b;
                      return pool.tokens[a.r] < pool.tokens[b.r];
                    });
  PhiLabels phi;
  for (std::size_t i = 0; i < take; ++i) {
    phi.tokens.push_back(pool.tokens[scored[i].r]);
    phi.distances.push_back(scored[i].distance);
  }
  while (phi.tokens.size() < k) {
    phi.tokens.push_back(phi.tokens.back());
    phi.distances.push_back(phi.distances.back());
  }
  return phi;
}

EntityPrompt build_entity_prompt(const Sentence& x, const SelectedTrfs& selected,
                                 const std::vector<std::string>& inventory) {
  return build_entity_prompt(x.tokens, selected.by_type, inventory);
}

EntityPrompt build_entity_prompt(const std::vector<std::string>& sentence_tokens,
                                 const std::vector<std::pair<std::string, std::vector<std::string>>>& grouping,
                                 const std::vector<std::string>& inventory) {
  EntityPrompt prompt;
  prompt.sentence_length = sentence_tokens.size();
  prompt.tokens = sentence_tokens;
  for (std::size_t i = 0; i < sentence_tokens.size(); ++i) {
    if (i) prompt.rendered += ' ';
    prompt.rendered += sentence_tokens[i];
  }
  for (const auto& [type, _] : grouping) {
    if (std::find(inventory.begin(), inventory.end(), type) == inventory.end()) {
      throw ValidationError("selected TRFs reference type '" + type + "' outside the inventory");
    }
  }
  for (const auto& type : inventory) {
    auto it = std::find_if(grouping.begin(), grouping.end(), [&](const auto& g) { return g.first == type; });
    if (it == grouping.end() || it->second.empty()) continue;
    prompt.rendered += kSegmentSeparator;
    prompt.rendered += type;
    prompt.rendered += ": ";
    prompt.tokens.emplace_back(kSepToken);
    prompt.tokens.push_back(type);
    prompt.tokens.emplace_back(":");
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      if (i) {
        prompt.rendered += ", ";
        prompt.tokens.emplace_back(",");
      }
      prompt.rendered += it->second[i];
      prompt.tokens.push_back(it->second[i]);
    }
    prompt.grouping.push_back(*it);
  }
  return prompt;
}

ParsedEntityPrompt parse_entity_prompt(std::string_view rendered) {
  ParsedEntityPrompt parsed;
  std::vector<std::string_view> segments;
  std::size_t pos = 0;
  while (true) {
    const auto next = rendered.find(kSegmentSeparator, pos);
    segments.push_back(rendered.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + kSegmentSeparator.size();
  }
  auto split_spaces = [](std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i <= text.size()) {
      const auto j = text.find(' ', i);
      out.emplace_back(text.substr(i, j == std::string_view::npos ? std::string_view::npos : j - i));
      if (j == std::string_view::npos) break;
      i = j + 1;
    }
    return out;
  };
  parsed.sentence_tokens = split_spaces(segments.front());
  for (std::size_t s = 1; s < segments.size(); ++s) {
    const auto seg = segments[s];
    const auto colon = seg.find(": ");
    if (colon == std::string_view::npos || colon == 0) throw ParseError("malformed prompt segment");
    std::string type(seg.substr(0, colon));
    auto words = split_spaces(seg.substr(colon + 2));
    for (std::size_t i = 0; i + 1 < words.size(); ++i) {
      if (words[i].size() < 2 || words[i].back() != ',') throw ParseError("malformed TRF list in prompt");
      words[i].pop_back();
    }
    parsed.grouping.push_back({std::move(type), std::move(words)});
  }
  return parsed;
}

nlohmann::json PromptedExample::to_json() const {
  nlohmann::json j;
  j["tokens"] = sentence.tokens;
  std::vector<std::string> labels;
  for (const auto& l : sentence.labels) labels.push_back(l.str());
  j["labels"] = labels;
  nlohmann::json sel = nlohmann::json::object();
  for (const auto& [type, tokens] : selected.by_type) sel[type] = tokens;
  j["selected"] = sel;
  j["phi"] = phi.tokens;
  j["rendered_prompt"] = prompt.rendered;
  return j;
}

std::vector<std::string> prompt_vocabulary(const std::vector<std::string>& types) {
  std::vector<std::string> words = selection_prompt_literals();
  words.emplace_back(":");
  words.emplace_back(",");
  words.insert(words.end(), types.begin(), types.end());
  return words;
}

}  // namespace pltr
