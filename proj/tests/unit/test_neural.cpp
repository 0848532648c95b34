#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pltr/checkpoint.hpp"
#include "pltr/encoder.hpp"
#include "pltr/error.hpp"
#include "pltr/losses.hpp"
#include "pltr/prompting.hpp"
#include "pltr/vocabulary.hpp"
#include "test_util.hpp"

using namespace pltr;
using pltr::testing::make_sentence;

namespace {

const std::vector<std::string> kWords{"a", "b", "c", "d", "e", "f", "g", "h", "type-related", "features:"};

EncoderModel tiny_model(std::size_t dim = 8, std::size_t depth = 1, std::uint64_t seed = 5) {
  ModelConfig cfg;
  cfg.dim = dim;
  cfg.depth = depth;
  cfg.heads = 2;
  cfg.ffn_dim = 2 * dim;
  cfg.max_len = 64;
  cfg.init_std = 0.3;
  cfg.seed = seed;
  std::vector<std::string> tokens{"[PAD]", "[UNK]", "[SEP]", "[MASK]"};
  tokens.insert(tokens.end(), kWords.begin(), kWords.end());
  return EncoderModel(cfg, Vocabulary(tokens), TagSet({"LOC", "PER"}));
}

std::vector<double> log_softmax(std::vector<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  const double lse = mx + std::log(s);
  for (double& v : z) v -= lse;
  return z;
}

double sum_exp(std::span<const double> logp) {
  double s = 0.0;
  for (double v : logp) s += std::exp(v);
  return s;
}

TrfPool pool_of(std::vector<std::string> tokens) {
  TrfPool p;
  p.tokens = std::move(tokens);
  std::sort(p.tokens.begin(), p.tokens.end());
  p.owner_types.assign(p.tokens.size(), "PER");
  p.owner_mi.assign(p.tokens.size(), 0.0);
  return p;
}

// Central finite differences on 50 random parameters.
template <class LossFn>
void gradient_check(EncoderModel& model, LossFn loss_of, std::uint64_t seed) {
  const double eps = 1e-4;
  const Gradients analytic = loss_of(model, true);
  std::mt19937_64 rng(seed);
  auto& p = model.parameters().values;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t i = rng() % p.size();
    const double keep = p[i];
    p[i] = keep + eps;
    const double up = loss_of(model, false).values[0];
    p[i] = keep - eps;
    const double down = loss_of(model, false).values[0];
    p[i] = keep;
    const double numeric = (up - down) / (2 * eps);
    const double a = analytic.values[i];
    // Parameters with an exactly zero true gradient (softmax-shift-invariant key
    // biases, unused rows) only carry roundoff; the floor keeps them from
    // dominating the relative error.
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    CAPTURE(i);
    CAPTURE(a);
    CAPTURE(numeric);
    CHECK(std::abs(a - numeric) / denom < 1e-4);
  }
}

}  // namespace

TEST_CASE("forward is deterministic and position sensitive") {
  const auto model = tiny_model();
  const std::vector<std::string> x{"a", "b", "c", "d", "e"};
  const auto o1 = model.encode(x);
  const auto o2 = model.encode(x);
  CHECK(o1.hidden == o2.hidden);
  CHECK(o1.tag_logprobs == o2.tag_logprobs);

  const std::vector<std::string> swapped{"d", "b", "c", "a", "e"};
  const auto o3 = model.encode(swapped);
  bool differs = false;
  for (std::size_t k = 0; k < model.dim(); ++k) differs = differs || o3.hidden_at(0)[k] != o1.hidden_at(3)[k];
  CHECK(differs);

  const auto same_seed = tiny_model();
  CHECK(same_seed.parameters().values == model.parameters().values);
  CHECK(tiny_model(8, 1, 6).parameters().values != model.parameters().values);
}

TEST_CASE("single token input") {
  const auto model = tiny_model();
  const auto out = model.encode(std::vector<std::string>{"a"});
  CHECK(out.length == 1);
  CHECK(sum_exp(out.tag_logprobs_at(0)) == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : out.tag_logprobs) CHECK(v <= 0.0);
}

TEST_CASE("overlength input is truncated explicitly") {
  const auto model = tiny_model();
  const std::vector<std::string> x(80, "a");
  const auto out = model.encode(x);
  CHECK(out.truncated);
  CHECK(out.length == 64);
  CHECK_FALSE(model.encode(std::vector<std::string>(64, "a")).truncated);
}

TEST_CASE("unknown tokens map to UNK and PAD is masked out of attention") {
  const auto model = tiny_model();
  CHECK(model.vocab().id("zzz") == Vocabulary::kUnk);
  const auto with_pad = model.encode(std::vector<std::string>{"a", "b", "[PAD]"});
  const auto without = model.encode(std::vector<std::string>{"a", "b"});
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t k = 0; k < model.dim(); ++k) {
      CHECK(with_pad.hidden_at(i)[k] == doctest::Approx(without.hidden_at(i)[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("tag head matches a manual projection of the final hidden states") {
  const auto model = tiny_model(8, 2);
  const auto out = model.encode(std::vector<std::string>{"a", "c", "e", "g"});
  const auto& L = model.layout();
  const auto& P = model.parameters().values;
  const std::size_t C = model.tags().size();
  for (std::size_t i = 0; i < out.length; ++i) {
    std::vector<double> z(C);
    for (std::size_t c = 0; c < C; ++c) {
      z[c] = P[L.tag_b + c];
      for (std::size_t k = 0; k < model.dim(); ++k) z[c] += out.hidden_at(i)[k] * P[L.tag_w + k * C + c];
    }
    const auto lp = log_softmax(z);
    for (std::size_t c = 0; c < C; ++c) CHECK(out.tag_logprobs_at(i)[c] == doctest::Approx(lp[c]).epsilon(1e-10));
  }
}

TEST_CASE("tag_loss: perfect fit, uniform, hand NLL") {
  auto model = tiny_model();
  const auto ids = model.vocab().encode(std::vector<std::string>{"a", "b", "c"});
  const auto& L = model.layout();
  auto& P = model.parameters().values;
  const std::size_t C = model.tags().size();

  std::fill(P.begin() + L.tag_w, P.begin() + L.tag_w + model.dim() * C, 0.0);
  std::fill(P.begin() + L.tag_b, P.begin() + L.tag_b + C, 0.0);
  {
    const auto pass = model.forward(ids);
    const std::vector<int> gold{0, 3, 0};
    CHECK(tag_loss(model, pass, gold).value == doctest::Approx(std::log(static_cast<double>(C))).epsilon(1e-12));
  }
  P[L.tag_b + 0] = 1000.0;
  {
    const auto pass = model.forward(ids);
    const std::vector<int> gold{0, 0, 0};
    CHECK(tag_loss(model, pass, gold).value == 0.0);
  }

  const auto fresh = tiny_model(8, 2, 9);
  const auto pass = fresh.forward(fresh.vocab().encode(std::vector<std::string>{"h", "g", "a", "d"}));
  const std::vector<int> gold{1, 4, 8, 0};
  double nll = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) nll -= pass.output().tag_logprobs_at(i)[gold[i]];
  CHECK(tag_loss(fresh, pass, gold).value == doctest::Approx(nll / 4).epsilon(1e-12));

  // Only the sentence prefix is scored.
  const std::vector<int> prefix{1, 4};
  const double first_two = -(pass.output().tag_logprobs_at(0)[1] + pass.output().tag_logprobs_at(1)[4]) / 2;
  CHECK(tag_loss(fresh, pass, prefix).value == doctest::Approx(first_two).epsilon(1e-12));

  const std::vector<int> bad{0, 99, 0, 0};
  CHECK_THROWS_AS(tag_loss(fresh, pass, bad), ValidationError);
}

TEST_CASE("label words and EntLM targets") {
  const Corpus c({make_sentence({"Ann", "met", "Bo"}, {"S-PER", "O", "S-PER"}),
                  make_sentence({"Ann", "in", "Rome"}, {"S-PER", "O", "S-LOC"})});
  const auto words = default_label_words(c);
  CHECK(words.at("PER") == "Ann");
  CHECK(words.at("LOC") == "Rome");
  CHECK(entlm_targets(c[0], words) == std::vector<std::string>{"Ann", "met", "Ann"});
  const auto all_o = make_sentence({"x", "y"}, {"O", "O"});
  CHECK(entlm_targets(all_o, words) == all_o.tokens);
}

TEST_CASE("entlm_loss: perfect fit and hand NLL") {
  auto model = tiny_model();
  const auto& L = model.layout();
  {
    auto& P = model.parameters().values;
    P[L.lm_b + static_cast<std::size_t>(model.vocab().id("a"))] = 1000.0;
    const auto pass = model.forward(model.vocab().encode(std::vector<std::string>{"a", "a", "a"}), true);
    const std::vector<std::string> targets{"a", "a", "a"};
    CHECK(entlm_loss(model, pass, targets).value == 0.0);
  }

  const auto fresh = tiny_model(8, 2, 21);
  const std::vector<std::string> x{"b", "c", "d", "e"};
  const std::vector<std::string> targets{"b", "h", "d", "h"};
  const auto pass = fresh.forward(fresh.vocab().encode(x), true);
  const auto& out = pass.output();
  const auto& P = fresh.parameters().values;
  const auto& FL = fresh.layout();
  const std::size_t V = fresh.vocab().size();
  double nll = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<double> z(V);
    for (std::size_t v = 0; v < V; ++v) {
      z[v] = P[FL.lm_b + v];
      const auto row = fresh.embedding_row(static_cast<int>(v));
      for (std::size_t k = 0; k < fresh.dim(); ++k) z[v] += out.hidden_at(i)[k] * row[k];
    }
    const auto lp = log_softmax(z);
    CHECK(sum_exp(out.lm_logprobs_at(i)) == doctest::Approx(1.0).epsilon(1e-10));
    nll -= lp[static_cast<std::size_t>(fresh.vocab().id(targets[i]))];
  }
  CHECK(entlm_loss(fresh, pass, targets).value == doctest::Approx(nll / 4).epsilon(1e-10));

  const std::vector<std::string> unknown{"b", "zzz", "d", "e"};
  CHECK_THROWS_AS(entlm_loss(fresh, pass, unknown), ValidationError);
}

TEST_CASE("gen_loss: singleton pool, uniform pool, composed oracle") {
  auto model = tiny_model();
  const auto prompt = build_selection_prompt(make_sentence({"a", "b"}, {"O", "O"}), 3);
  {
    const auto pass = model.forward(model.vocab().encode(prompt.tokens));
    const auto pool = pool_of({"c"});
    const std::vector<std::string> phi{"c", "c", "c"};
    const auto node = gen_loss(model, pass, phi, pool);
    CHECK(node.value == 0.0);
    const auto g = model.gradients(node);
    CHECK(g.squared_norm() == 0.0);
  }
  {
    const std::vector<std::string> eight{"a", "b", "c", "d", "e", "f", "g", "h"};
    auto& P = model.parameters().values;
    const auto& L = model.layout();
    for (const auto& w : eight) {
      const auto id = static_cast<std::size_t>(model.vocab().id(w));
      for (std::size_t k = 0; k < model.dim(); ++k) P[L.tok_emb + id * model.dim() + k] = 0.25;
    }
    const auto pass = model.forward(model.vocab().encode(prompt.tokens));
    const std::vector<std::string> phi{"a", "e", "h"};
    CHECK(gen_loss(model, pass, phi, pool_of(eight)).value == doctest::Approx(std::log(8.0)).epsilon(1e-12));
  }
  {
    const auto fresh = tiny_model(8, 2, 33);
    const auto pool = pool_of({"c", "d", "e", "f", "g"});
    const auto pass = fresh.forward(fresh.vocab().encode(prompt.tokens));
    const std::vector<std::string> phi{"e", "c", "g"};
    double expected = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      const auto dist = fill_distribution(pass.output().hidden_at(prompt.mask_positions[i]), pool, fresh);
      const auto at = std::find(dist.tokens.begin(), dist.tokens.end(), phi[i]) - dist.tokens.begin();
      expected -= std::log(dist.probabilities[static_cast<std::size_t>(at)]);
    }
    CHECK(gen_loss(fresh, pass, phi, pool).value == doctest::Approx(expected / 3).epsilon(1e-12));
    const std::vector<std::string> outside{"e", "a", "g"};
    CHECK_THROWS_AS(gen_loss(fresh, pass, outside, pool), ValidationError);
  }
}

TEST_CASE("finite-difference gradients: tag_loss") {
  auto model = tiny_model(8, 1, 41);
  const auto ids = model.vocab().encode(std::vector<std::string>{"a", "b", "c", "d", "e"});
  const std::vector<int> gold{0, 1, 3, 0, 8};
  gradient_check(
      model,
      [&](const EncoderModel& m, bool grad) {
        const auto pass = m.forward(ids);
        const auto node = tag_loss(m, pass, gold);
        if (grad) return m.gradients(node);
        Gradients g(1);
        g.values[0] = node.value;
        return g;
      },
      1);
}

TEST_CASE("finite-difference gradients: entlm_loss") {
  auto model = tiny_model(8, 1, 42);
  const auto ids = model.vocab().encode(std::vector<std::string>{"a", "b", "c", "d"});
  const std::vector<std::string> targets{"a", "h", "c", "g"};
  gradient_check(
      model,
      [&](const EncoderModel& m, bool grad) {
        const auto pass = m.forward(ids, true);
        const auto node = entlm_loss(m, pass, targets);
        if (grad) return m.gradients(node);
        Gradients g(1);
        g.values[0] = node.value;
        return g;
      },
      2);
}

TEST_CASE("finite-difference gradients: gen_loss") {
  auto model = tiny_model(8, 1, 43);
  const auto prompt = build_selection_prompt(make_sentence({"a", "b", "c"}, {"O", "O", "O"}), 3);
  const auto ids = model.vocab().encode(prompt.tokens);
  const auto pool = pool_of({"a", "c", "e", "g"});
  const std::vector<std::string> phi{"a", "c", "g"};
  gradient_check(
      model,
      [&](const EncoderModel& m, bool grad) {
        const auto pass = m.forward(ids);
        const auto node = gen_loss(m, pass, phi, pool);
        if (grad) return m.gradients(node);
        Gradients g(1);
        g.values[0] = node.value;
        return g;
      },
      3);
}

TEST_CASE("gradients are linear in the loss") {
  const auto model = tiny_model(8, 2, 44);
  const auto pass = model.forward(model.vocab().encode(std::vector<std::string>{"a", "b", "c"}), true);
  const std::vector<int> gold{0, 2, 0};
  const std::vector<std::string> targets{"a", "f", "c"};
  const auto t = tag_loss(model, pass, gold);
  const auto e = entlm_loss(model, pass, targets);
  auto sum = t.scaled(0.3);
  sum += e.scaled(0.7);
  const auto g_sum = model.gradients(sum);
  auto g_parts = model.gradients(t);
  g_parts *= 0.3;
  auto g_e = model.gradients(e);
  g_e *= 0.7;
  g_parts += g_e;
  for (std::size_t i = 0; i < g_sum.size(); ++i) {
    const double a = g_sum.values[i];
    const double b = g_parts.values[i];
    CHECK(std::abs(a - b) <= 1e-12 + 1e-9 * std::max(std::abs(a), std::abs(b)));
  }

  const auto other = model.forward(model.vocab().encode(std::vector<std::string>{"a"}));
  auto mixed = t;
  CHECK_THROWS_AS(mixed += tag_loss(model, other, std::vector<int>{0}), ValidationError);
}

TEST_CASE("probability heads sum to one on random inputs") {
  const auto model = tiny_model(8, 2, 45);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> x;
    const std::size_t n = 1 + rng() % 20;
    for (std::size_t i = 0; i < n; ++i) x.push_back(kWords[rng() % kWords.size()]);
    const auto pass = model.forward(model.vocab().encode(x), true);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(sum_exp(pass.output().tag_logprobs_at(i)) == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(sum_exp(pass.output().lm_logprobs_at(i)) == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("vocabulary round trip and construction") {
  const auto model = tiny_model();
  const auto& v = model.vocab();
  for (int id = 0; id < static_cast<int>(v.size()); ++id) CHECK(v.id(v.token(id)) == id);
  CHECK(v.token(Vocabulary::kPad) == "[PAD]");
  CHECK(v.token(Vocabulary::kUnk) == "[UNK]");
  CHECK(v.token(Vocabulary::kSep) == "[SEP]");
  CHECK(v.token(Vocabulary::kMask) == "[MASK]");

  const Corpus c({make_sentence({"b", "a", "b"}, {"O", "O", "O"})});
  const auto built = Vocabulary::build(c, {"z"}, 2);
  CHECK(built.contains("b"));
  CHECK_FALSE(built.contains("a"));
  CHECK(built.contains("z"));
  CHECK(std::is_sorted(built.tokens().begin() + 4, built.tokens().end()));
}

TEST_CASE("checkpoint is bit-stable") {
  Checkpoint ck{tiny_model(8, 2, 46), {{"note", "x"}}};
  const auto bytes = serialize_checkpoint(ck);
  CHECK(bytes.substr(0, 8) == "PLTRCKPT");
  const auto back = deserialize_checkpoint(bytes);
  CHECK(back.model == ck.model);
  CHECK(back.metadata == ck.metadata);
  CHECK(serialize_checkpoint(back) == bytes);
  const auto x = std::vector<std::string>{"a", "b", "c"};
  CHECK(back.model.encode(x).hidden == ck.model.encode(x).hidden);

  CHECK_THROWS_AS(deserialize_checkpoint("garbage"), ParseError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), ParseError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.ckpt"), MissingInputError);
}

TEST_CASE("model config validation") {
  ModelConfig cfg;
  cfg.dim = 10;
  cfg.heads = 3;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.heads = 2;
  cfg.max_len = 300;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.max_len = 256;
  CHECK_NOTHROW(cfg.validate());
  CHECK(ModelConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
}
