#include "pltr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "pltr/error.hpp"

namespace pltr {
namespace {

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> workers;
  for (std::size_t w = 0; w < threads; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += threads) fn(i);
    });
  }
}

nlohmann::json counts_json(const Counts& c) {
  return {{"tp", c.tp},
          {"fp", c.fp},
          {"fn", c.fn},
          {"precision", c.precision()},
          {"recall", c.recall()},
          {"f1", c.f1()},
          {"support", c.support()}};
}

// Averages the first n positions.
std::vector<double> mean_pool(const ForwardOutput& out, std::size_t n) {
  std::vector<double> v(out.dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto h = out.hidden_at(i);
    for (std::size_t c = 0; c < out.dim; ++c) v[c] += h[c];
  }
  for (double& x : v) x /= static_cast<double>(n);
  return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

nlohmann::json F1Report::to_json() const {
  nlohmann::json j = counts_json(micro);
  j["micro_f1"] = micro.f1();
  nlohmann::json types = nlohmann::json::object();
  for (const auto& [type, c] : per_type) types[type] = counts_json(c);
  j["per_type"] = types;
  return j;
}

F1Report micro_f1(const LabelSequences& predicted, const LabelSequences& gold) {
  if (predicted.size() != gold.size()) throw ValidationError("prediction and gold sentence counts differ");
  F1Report report;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (predicted[s].size() != gold[s].size()) {
      throw ValidationError("length mismatch in sentence " + std::to_string(s));
    }
    auto pred_spans = decode_spans(predicted[s]);
    auto gold_spans = decode_spans(gold[s]);
    std::sort(pred_spans.begin(), pred_spans.end());
    std::sort(gold_spans.begin(), gold_spans.end());
    for (const auto& g : gold_spans) report.per_type[g.type];
    for (const auto& p : pred_spans) {
      if (std::binary_search(gold_spans.begin(), gold_spans.end(), p)) {
        ++report.per_type[p.type].tp;
      } else {
        ++report.per_type[p.type].fp;
      }
    }
    for (const auto& g : gold_spans) {
      if (!std::binary_search(pred_spans.begin(), pred_spans.end(), g)) ++report.per_type[g.type].fn;
    }
  }
  for (const auto& [_, c] : report.per_type) {
    report.micro.tp += c.tp;
    report.micro.fp += c.fp;
    report.micro.fn += c.fn;
  }
  return report;
}

std::string length_bucket_name(std::size_t tokens) {
  if (tokens < 25) return "<25";
  if (tokens <= 35) return "25-35";
  return ">35";
}

std::vector<LengthBucket> length_buckets(const Corpus& gold, const LabelSequences& predicted) {
  if (predicted.size() != gold.size()) throw ValidationError("prediction and gold sentence counts differ");
  static const std::vector<std::string> kNames{"<25", "25-35", ">35"};
  std::vector<LengthBucket> buckets;
  for (const auto& name : kNames) {
    LabelSequences p, g;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (length_bucket_name(gold[i].size()) != name) continue;
      p.push_back(predicted[i]);
      g.push_back(gold[i].labels);
    }
    if (g.empty()) continue;
    buckets.push_back({name, g.size(), micro_f1(p, g)});
  }
  return buckets;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j = scores.to_json();
  j["sentences"] = sentences;
  nlohmann::json b = nlohmann::json::array();
  for (const auto& bucket : buckets) {
    b.push_back({{"bucket", bucket.name}, {"sentences", bucket.sentences}, {"f1", bucket.scores.micro_f1()},
                 {"scores", bucket.scores.to_json()}});
  }
  j["length_buckets"] = b;
  if (similarity) j["similarity"] = *similarity;
  return j;
}

LabelSequences predict_all(const Tagger& tagger, const Corpus& corpus, std::size_t threads) {
  LabelSequences out(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) { out[i] = tagger.predict(corpus[i]); });
  return out;
}

EvalReport evaluate(const Tagger& tagger, const Corpus& corpus, std::size_t threads) {
  const auto predicted = predict_all(tagger, corpus, threads);
  LabelSequences gold;
  gold.reserve(corpus.size());
  for (const auto& s : corpus) gold.push_back(s.labels);
  EvalReport report;
  report.scores = micro_f1(predicted, gold);
  report.sentences = corpus.size();
  report.buckets = length_buckets(corpus, predicted);
  return report;
}

EvalReport evaluate_ood(const Tagger& tagger, const Corpus& ood, const std::set<std::string>& known_types,
                        std::size_t threads) {
  return evaluate(tagger, remap_ood_labels(ood, known_types), threads);
}

std::vector<LengthBucket> length_bucket_report(const Tagger& tagger, const Corpus& corpus, std::size_t threads) {
  if (corpus.empty()) throw ValidationError("length buckets need a non-empty corpus");
  return length_buckets(corpus, predict_all(tagger, corpus, threads));
}

double similarity_report(const Encoder& encoder, const Corpus& domain_a, const Corpus& domain_b,
                         const InputBuilder& inputs, std::uint64_t seed, std::size_t max_pairs) {
  if (domain_a.empty() || domain_b.empty()) throw ValidationError("similarity needs two non-empty corpora");
  auto pooled = [&](const Corpus& c) {
    std::vector<std::vector<double>> reps;
    reps.reserve(c.size());
    for (const auto& s : c) {
      const auto out = encoder.encode(inputs(s));
      reps.push_back(mean_pool(out, std::min(s.size(), out.length)));
    }
    return reps;
  };
  const auto ra = pooled(domain_a);
  const auto rb = pooled(domain_b);

  double sum = 0.0;
  std::size_t pairs = 0;
  if (ra.size() * rb.size() <= max_pairs) {
    for (const auto& a : ra) {
      for (const auto& b : rb) {
        sum += cosine(a, b);
        ++pairs;
      }
    }
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_a(0, ra.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_b(0, rb.size() - 1);
    for (; pairs < max_pairs; ++pairs) sum += cosine(ra[pick_a(rng)], rb[pick_b(rng)]);
  }
  return sum / static_cast<double>(pairs);
}

double similarity_report(const Tagger& tagger, const Corpus& domain_a, const Corpus& domain_b, bool with_prompts,
                         std::uint64_t seed, std::size_t max_pairs) {
  InputBuilder inputs = [&](const Sentence& s) {
    return with_prompts ? tagger.entity_prompt(s).tokens : s.tokens;
  };
  return similarity_report(tagger.model(), domain_a, domain_b, inputs, seed, max_pairs);
}

}  // namespace pltr
