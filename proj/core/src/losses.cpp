#include "pltr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "pltr/error.hpp"

namespace pltr {
namespace {

LossNode make_node(const EncoderModel& model, const ForwardPass& pass) {
  LossNode node;
  node.pass = &pass;
  node.d_hidden.assign(pass.length() * model.dim(), 0.0);
  node.direct = Gradients(model.layout().total);
  return node;
}

}  // namespace

LossNode tag_loss(const EncoderModel& model, const ForwardPass& pass, std::span<const int> gold) {
  const auto& out = pass.output();
  if (gold.empty() || gold.size() > out.length) throw ValidationError("gold labels do not fit the sequence");
  const std::size_t T = out.num_tags;
  const std::size_t d = out.dim;
  const double inv = 1.0 / static_cast<double>(gold.size());
  const auto& L = model.layout();
  const double* P = model.parameters().values.data();

  LossNode node = make_node(model, pass);
  double* G = node.direct.values.data();
  std::vector<double> dlogits(T);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || static_cast<std::size_t>(gold[i]) >= T) throw ValidationError("label id out of range");
    const auto lp = out.tag_logprobs_at(i);
    node.value -= lp[static_cast<std::size_t>(gold[i])] * inv;
    for (std::size_t c = 0; c < T; ++c) dlogits[c] = std::exp(lp[c]) * inv;
    dlogits[static_cast<std::size_t>(gold[i])] -= inv;

    const auto h = out.hidden_at(i);
    double* dh = node.d_hidden.data() + i * d;
    for (std::size_t k = 0; k < d; ++k) {
      const double* wk = P + L.tag_w + k * T;
      double* gk = G + L.tag_w + k * T;
      double acc = 0.0;
      for (std::size_t c = 0; c < T; ++c) {
        acc += dlogits[c] * wk[c];
        gk[c] += h[k] * dlogits[c];
      }
      dh[k] += acc;
    }
    for (std::size_t c = 0; c < T; ++c) G[L.tag_b + c] += dlogits[c];
  }
  return node;
}

LabelWords default_label_words(const Corpus& corpus) {
  std::map<std::string, std::map<std::string, std::size_t>> counts;
  for (const auto& s : corpus) {
    for (const auto& span : s.spans()) {
      for (std::size_t i = span.begin; i < span.end; ++i) ++counts[span.type][s.tokens[i]];
    }
  }
  LabelWords words;
  std::set<std::string> used;
  for (const auto& [type, tokens] : counts) {
    const std::string* best = nullptr;
    std::size_t best_n = 0;
    for (const auto& [token, n] : tokens) {
      if (used.contains(token)) continue;
      if (n > best_n) {
        best = &token;
        best_n = n;
      }
    }
    if (!best) throw ValidationError("no distinct label word available for type '" + type + "'");
    words[type] = *best;
    used.insert(*best);
  }
  return words;
}

std::vector<std::string> entlm_targets(const Sentence& sentence, const LabelWords& words) {
  std::vector<std::string> targets = sentence.tokens;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    const auto& label = sentence.labels[i];
    if (label.is_outside()) continue;
    auto it = words.find(label.type());
    if (it == words.end()) throw ValidationError("no label word for type '" + label.type() + "'");
    targets[i] = it->second;
  }
  return targets;
}

LossNode entlm_loss(const EncoderModel& model, const ForwardPass& pass, std::span<const std::string> targets) {
  const auto& out = pass.output();
  if (out.lm_logprobs.empty()) throw ValidationError("entlm_loss needs a forward pass with the LM head");
  if (targets.empty() || targets.size() > out.length) throw ValidationError("targets do not fit the sequence");
  const std::size_t V = out.vocab_size;
  const std::size_t d = out.dim;
  const double inv = 1.0 / static_cast<double>(targets.size());
  const auto& L = model.layout();
  const double* P = model.parameters().values.data();

  LossNode node = make_node(model, pass);
  double* G = node.direct.values.data();
  std::vector<double> dlogits(V);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!model.vocab().contains(targets[i])) {
      throw ValidationError("target token '" + targets[i] + "' is not in the vocabulary");
    }
    const auto target = static_cast<std::size_t>(model.vocab().id(targets[i]));
    const auto lp = out.lm_logprobs_at(i);
    node.value -= lp[target] * inv;
    for (std::size_t v = 0; v < V; ++v) dlogits[v] = std::exp(lp[v]) * inv;
    dlogits[target] -= inv;

    const auto h = out.hidden_at(i);
    double* dh = node.d_hidden.data() + i * d;
    for (std::size_t v = 0; v < V; ++v) {
      const double g = dlogits[v];
      const double* ev = P + L.tok_emb + v * d;
      double* gv = G + L.tok_emb + v * d;
      for (std::size_t k = 0; k < d; ++k) {
        dh[k] += g * ev[k];
        gv[k] += g * h[k];
      }
      G[L.lm_b + v] += g;
    }
  }
  return node;
}

std::vector<double> restricted_softmax(const EncoderModel& model, std::span<const double> hidden,
                                       std::span<const int> candidate_ids) {
  if (candidate_ids.empty()) throw ValidationError("mask-fill distribution over an empty candidate set");
  std::vector<double> scores(candidate_ids.size());
  for (std::size_t r = 0; r < candidate_ids.size(); ++r) {
    const auto e = model.embedding_row(candidate_ids[r]);
    double s = 0.0;
    for (std::size_t k = 0; k < hidden.size(); ++k) s += e[k] * hidden[k];
    scores[r] = s;
  }
  const double mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - mx);
    sum += s;
  }
  for (double& s : scores) s /= sum;
  return scores;
}

LossNode gen_loss(const EncoderModel& model, const ForwardPass& pass, std::span<const std::string> phi,
                  const TrfPool& pool) {
  const auto& out = pass.output();
  const std::size_t K = out.mask_positions.size();
  if (K == 0 || phi.size() != K) throw ValidationError("phi labels must match the mask slots");
  if (pool.empty()) throw ValidationError("empty TRF pool");
  const std::size_t d = out.dim;
  const auto& L = model.layout();

  std::vector<int> ids(pool.size());
  for (std::size_t r = 0; r < pool.size(); ++r) ids[r] = model.vocab().id(pool.tokens[r]);

  LossNode node = make_node(model, pass);
  double* G = node.direct.values.data();
  const double inv = 1.0 / static_cast<double>(K);
  for (std::size_t m = 0; m < K; ++m) {
    const auto target = pool.index_of(phi[m]);
    if (!target) throw ValidationError("phi label '" + phi[m] + "' is not in the TRF pool");
    const std::size_t pos = out.mask_positions[m];
    const auto h = out.hidden_at(pos);
    const auto probs = restricted_softmax(model, h, ids);
    node.value -= std::log(probs[*target]) * inv;
    double* dh = node.d_hidden.data() + pos * d;
    for (std::size_t r = 0; r < pool.size(); ++r) {
      const double g = (probs[r] - (r == *target ? 1.0 : 0.0)) * inv;
      if (g == 0.0) continue;
      const auto e = model.embedding_row(ids[r]);
      double* ge = G + L.tok_emb + static_cast<std::size_t>(ids[r]) * d;
      for (std::size_t k = 0; k < d; ++k) {
        dh[k] += g * e[k];
        ge[k] += g * h[k];
      }
    }
  }
  return node;
}

double total_loss(double l_ner, double l_gen, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  if (l_ner < 0.0 || l_gen < 0.0) throw ValidationError("losses must be non-negative");
  return alpha * l_ner + (1.0 - alpha) * l_gen;
}

}  // namespace pltr
