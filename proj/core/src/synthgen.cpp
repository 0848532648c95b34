#include "pltr/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "pltr/error.hpp"

namespace pltr {
namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)) ^ (0xd1b54a32d192ed03ULL * (index + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Pronounceable lowercase pseudo-words, unique across every lexicon.
class WordFactory {
 public:
  explicit WordFactory(std::uint64_t seed) : rng_(seed) {}

  std::string next() {
    static constexpr std::string_view kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r",
                                                   "s", "t", "v", "z", "br", "tr", "st", "kl", "sh", "ch"};
    static constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou", "ea"};
    while (true) {
      std::string w;
      const std::size_t syllables = 2 + uniform_index(rng_, 2);
      for (std::size_t s = 0; s < syllables; ++s) {
        w += kOnsets[uniform_index(rng_, std::size(kOnsets))];
        w += kVowels[uniform_index(rng_, std::size(kVowels))];
      }
      if (uniform_index(rng_, 3) == 0) w += "n";
      if (used_.insert(w).second) return w;
    }
  }

  std::vector<std::string> batch(std::size_t n) {
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(next());
    return out;
  }

 private:
  std::mt19937_64 rng_;
  std::set<std::string> used_;
};

class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double exponent) : cdf_(n) {
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), exponent);
      cdf_[r] = acc;
    }
    for (double& c : cdf_) c /= acc;
  }

  std::size_t sample(std::mt19937_64& rng) const {
    const double u = uniform01(rng);
    auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

struct Lexicons {
  std::vector<std::string> background;
  std::vector<std::vector<std::string>> cues;    // per type
  std::vector<std::vector<std::string>> source;  // per type
  std::vector<std::vector<std::string>> target;  // per type
};

Lexicons build_lexicons(const SynthSpec& spec) {
  WordFactory words(derive_seed(spec.seed, 1, 0));
  Lexicons lex;
  lex.background = words.batch(spec.background_vocab);
  for (std::size_t t = 0; t < spec.types.size(); ++t) lex.cues.push_back(words.batch(spec.cues_per_type));
  for (std::size_t t = 0; t < spec.types.size(); ++t) lex.source.push_back(words.batch(spec.entities_per_type));
  const auto shared = static_cast<std::size_t>(
      std::llround((1.0 - spec.shift) * static_cast<double>(spec.entities_per_type)));
  for (std::size_t t = 0; t < spec.types.size(); ++t) {
    std::vector<std::string> target(lex.source[t].begin(), lex.source[t].begin() + static_cast<std::ptrdiff_t>(shared));
    auto fresh = words.batch(spec.entities_per_type - shared);
    target.insert(target.end(), fresh.begin(), fresh.end());
    lex.target.push_back(std::move(target));
  }
  return lex;
}

struct Chunk {
  std::vector<std::string> tokens;
  std::vector<EntityLabel> labels;
};

Sentence make_sentence(const SynthSpec& spec, const Lexicons& lex, const ZipfSampler& zipf,
                       const std::vector<std::vector<std::string>>& entities, std::size_t primary,
                       const std::string& domain, std::mt19937_64& rng) {
  const std::size_t n_types = spec.types.size();
  std::vector<std::size_t> types{primary};
  if (n_types > 1 && uniform01(rng) < spec.second_entity_prob) {
    std::size_t other = uniform_index(rng, n_types - 1);
    if (other >= primary) ++other;
    types.push_back(other);
  }

  std::vector<Chunk> chunks;
  std::size_t used = 0;
  for (auto t : types) {
    Chunk c;
    const std::size_t len = 1 + uniform_index(rng, spec.max_entity_length);
    std::vector<Span> spans{{0, len, spec.types[t]}};
    for (std::size_t i = 0; i < len; ++i) c.tokens.push_back(entities[t][uniform_index(rng, entities[t].size())]);
    if (uniform01(rng) < spec.cue_prob) {
      const auto& cue = lex.cues[t][uniform_index(rng, lex.cues[t].size())];
      if (uniform01(rng) < 0.5) {
        c.tokens.insert(c.tokens.begin(), cue);
        spans[0].begin += 1;
        spans[0].end += 1;
      } else {
        c.tokens.push_back(cue);
      }
    }
    c.labels = encode_spans(spans, c.tokens.size());
    used += c.tokens.size();
    chunks.push_back(std::move(c));
  }

  const std::size_t length = spec.min_length + uniform_index(rng, spec.max_length - spec.min_length + 1);
  const std::size_t min_fillers = chunks.size() - 1;
  const std::size_t fillers = std::max(min_fillers, length > used ? length - used : 0);
  std::vector<std::size_t> gaps(chunks.size() + 1, 0);
  for (std::size_t g = 1; g < chunks.size(); ++g) gaps[g] = 1;
  for (std::size_t f = min_fillers; f < fillers; ++f) ++gaps[uniform_index(rng, gaps.size())];

  Sentence s;
  s.domain_id = domain;
  auto add_fillers = [&](std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      s.tokens.push_back(lex.background[zipf.sample(rng)]);
      s.labels.emplace_back();
    }
  };
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    add_fillers(gaps[c]);
    s.tokens.insert(s.tokens.end(), chunks[c].tokens.begin(), chunks[c].tokens.end());
    s.labels.insert(s.labels.end(), chunks[c].labels.begin(), chunks[c].labels.end());
  }
  add_fillers(gaps.back());
  return s;
}

Corpus make_split(const SynthSpec& spec, const Lexicons& lex, const ZipfSampler& zipf,
                  const std::vector<std::vector<std::string>>& entities, std::size_t per_type, std::uint64_t stream,
                  const std::string& domain, Split split) {
  std::vector<Sentence> sentences;
  const std::size_t n = per_type * spec.types.size();
  sentences.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(derive_seed(spec.seed, stream, i));
    sentences.push_back(make_sentence(spec, lex, zipf, entities, i % spec.types.size(), domain, rng));
  }
  return Corpus(std::move(sentences), split);
}

}  // namespace

void SynthSpec::validate() const {
  if (types.empty()) throw ValidationError("synthetic spec needs at least one type");
  if (entities_per_type == 0 || cues_per_type == 0 || background_vocab == 0) {
    throw ValidationError("lexicons must be non-empty");
  }
  for (double p : {shift, cue_prob, second_entity_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probabilities and shift must lie in [0, 1]");
  }
  if (min_length == 0 || min_length > max_length) throw ValidationError("invalid sentence length range");
  if (max_entity_length == 0) throw ValidationError("max_entity_length must be >= 1");
  const std::size_t longest = 2 * (max_entity_length + 1) + 1;
  if (max_entity_length + 1 > max_length || (second_entity_prob > 0.0 && longest > max_length)) {
    throw ValidationError("infeasible spec: entities with cues do not fit in max_length tokens");
  }
  if (max_length > 256) throw ValidationError("max_length must be <= 256");
}

nlohmann::json SynthSpec::to_json() const {
  return {{"types", types},
          {"entities_per_type", entities_per_type},
          {"shift", shift},
          {"cues_per_type", cues_per_type},
          {"background_vocab", background_vocab},
          {"zipf_exponent", zipf_exponent},
          {"min_length", min_length},
          {"max_length", max_length},
          {"max_entity_length", max_entity_length},
          {"second_entity_prob", second_entity_prob},
          {"cue_prob", cue_prob},
          {"train_per_type", train_per_type},
          {"dev_per_type", dev_per_type},
          {"test_per_type", test_per_type},
          {"target_per_type", target_per_type},
          {"seed", seed}};
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  SynthSpec s;
  try {
    s.types = j.value("types", s.types);
    s.entities_per_type = j.value("entities_per_type", s.entities_per_type);
    s.shift = j.value("shift", s.shift);
    s.cues_per_type = j.value("cues_per_type", s.cues_per_type);
    s.background_vocab = j.value("background_vocab", s.background_vocab);
    s.zipf_exponent = j.value("zipf_exponent", s.zipf_exponent);
    s.min_length = j.value("min_length", s.min_length);
    s.max_length = j.value("max_length", s.max_length);
    s.max_entity_length = j.value("max_entity_length", s.max_entity_length);
    s.second_entity_prob = j.value("second_entity_prob", s.second_entity_prob);
    s.cue_prob = j.value("cue_prob", s.cue_prob);
    s.train_per_type = j.value("train_per_type", s.train_per_type);
    s.dev_per_type = j.value("dev_per_type", s.dev_per_type);
    s.test_per_type = j.value("test_per_type", s.test_per_type);
    s.target_per_type = j.value("target_per_type", s.target_per_type);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed synthetic spec: ") + e.what());
  }
  return s;
}

nlohmann::json SynthBenchmark::manifest(const SynthSpec& spec) const {
  nlohmann::json j;
  j["spec"] = spec.to_json();
  j["cues"] = cues;
  j["entity_overlap"] = entity_overlap;
  j["files"] = {{"source_train", "source_train.conll"}, {"source_dev", "source_dev.conll"},
                {"source_test", "source_test.conll"},   {"target_dev", "target_dev.conll"},
                {"target_test", "target_test.conll"}};
  return j;
}

SynthBenchmark generate(const SynthSpec& spec) {
  spec.validate();
  const Lexicons lex = build_lexicons(spec);
  const ZipfSampler zipf(lex.background.size(), spec.zipf_exponent);

  SynthBenchmark bench;
  bench.source_train = make_split(spec, lex, zipf, lex.source, spec.train_per_type, 10, "source", Split::train);
  bench.source_dev = make_split(spec, lex, zipf, lex.source, spec.dev_per_type, 11, "source", Split::dev);
  bench.source_test = make_split(spec, lex, zipf, lex.source, spec.test_per_type, 12, "source", Split::test);
  bench.target_dev = make_split(spec, lex, zipf, lex.target, spec.dev_per_type, 20, "target", Split::dev);
  bench.target_test = make_split(spec, lex, zipf, lex.target, spec.target_per_type, 21, "target", Split::test);
  for (std::size_t t = 0; t < spec.types.size(); ++t) bench.cues[spec.types[t]] = lex.cues[t];
  bench.entity_overlap = pltr::entity_overlap(bench.source_train, bench.target_test);
  return bench;
}

double entity_overlap(const Corpus& source, const Corpus& target) {
  auto entity_tokens = [](const Corpus& c) {
    std::set<std::string> out;
    for (const auto& s : c) {
      for (const auto& span : s.spans()) {
        for (std::size_t i = span.begin; i < span.end; ++i) out.insert(s.tokens[i]);
      }
    }
    return out;
  };
  const auto src = entity_tokens(source);
  const auto tgt = entity_tokens(target);
  if (tgt.empty()) return 0.0;
  std::size_t shared = 0;
  for (const auto& t : tgt) shared += src.contains(t);
  return static_cast<double>(shared) / static_cast<double>(tgt.size());
}

SynthSpec calibrate_shift(SynthSpec spec, double target, double tolerance) {
  double lo = 0.0;
  double hi = 1.0;
  SynthSpec best = spec;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 30; ++iter) {
    spec.shift = 0.5 * (lo + hi);
    const double overlap = generate(spec).entity_overlap;
    const double gap = std::abs(overlap - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = spec;
    }
    if (gap <= tolerance) break;
    if (overlap > target) {
      lo = spec.shift;
    } else {
      hi = spec.shift;
    }
  }
  return best;
}

}  // namespace pltr
