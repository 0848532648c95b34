#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pltr/error.hpp"
#include "pltr/eval.hpp"
#include "pltr/losses.hpp"
#include "pltr/optimizer.hpp"
#include "pltr/prompting.hpp"
#include "pltr/synthgen.hpp"
#include "pltr/training.hpp"
#include "pltr/vocabulary.hpp"
#include "test_util.hpp"

using namespace pltr;
using pltr::testing::make_sentence;

namespace {

// Token identity decides the tag: names are PER, cities LOC.
Corpus separable(std::uint64_t seed, std::size_t n) {
  const std::vector<std::string> names{"Ann", "Bob", "Cid", "Dee"};
  const std::vector<std::string> cities{"Oslo", "Rome", "Lima", "Kiev"};
  const std::vector<std::string> filler{"the", "went", "to", "from", "and", "saw"};
  std::mt19937_64 rng(seed);
  std::vector<Sentence> out;
  for (std::size_t i = 0; i < n; ++i) {
    Sentence s;
    const std::size_t len = 3 + rng() % 4;
    for (std::size_t j = 0; j < len; ++j) {
      switch (rng() % 3) {
        case 0:
          s.tokens.push_back(names[rng() % names.size()]);
          s.labels.push_back(EntityLabel::parse("S-PER"));
          break;
        case 1:
          s.tokens.push_back(cities[rng() % cities.size()]);
          s.labels.push_back(EntityLabel::parse("S-LOC"));
          break;
        default:
          s.tokens.push_back(filler[rng() % filler.size()]);
          s.labels.emplace_back();
      }
    }
    out.push_back(std::move(s));
  }
  return Corpus(std::move(out));
}

TrainConfig small_config() {
  auto cfg = TrainConfig::desk_profile();
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.model.dim = 16;
  cfg.model.ffn_dim = 32;
  cfg.model.depth = 1;
  cfg.k = 3;
  return cfg;
}

}  // namespace

TEST_CASE("total_loss arithmetic") {
  CHECK(total_loss(2.0, 4.0, 0.5) == doctest::Approx(3.0));
  CHECK(total_loss(1.0, 100.0, 0.9) == doctest::Approx(10.9));
  CHECK_THROWS_AS(total_loss(1.0, 1.0, 0.0), ValidationError);
  CHECK_THROWS_AS(total_loss(1.0, 1.0, 1.0), ValidationError);
  CHECK_THROWS_AS(total_loss(-1.0, 1.0, 0.5), ValidationError);
}

TEST_CASE("gradient of the mixed loss matches finite differences") {
  ModelConfig mc;
  mc.dim = 8;
  mc.depth = 1;
  mc.heads = 2;
  mc.ffn_dim = 16;
  mc.max_len = 32;
  mc.init_std = 0.3;
  std::vector<std::string> words{"[PAD]", "[UNK]", "[SEP]", "[MASK]", "a", "b", "c", "d", "type-related", "features:"};
  EncoderModel model(mc, Vocabulary(words), TagSet({"PER"}));
  const auto x = make_sentence({"a", "b", "c"}, {"S-PER", "O", "O"});
  const auto prompt = build_selection_prompt(x, 2);
  TrfPool pool;
  pool.tokens = {"a", "c", "d"};
  pool.owner_types.assign(3, "PER");
  pool.owner_mi.assign(3, 0.0);
  const std::vector<std::string> phi{"a", "c"};
  const std::vector<int> gold{model.tags().index(x.labels[0]), 0, 0};
  const auto ner_ids = model.vocab().encode(x.tokens);
  const auto sel_ids = model.vocab().encode(prompt.tokens);
  const double alpha = 0.75;

  auto value = [&](const EncoderModel& m) {
    const auto np = m.forward(ner_ids);
    const auto sp = m.forward(sel_ids);
    return total_loss(tag_loss(m, np, gold).value, gen_loss(m, sp, phi, pool).value, alpha);
  };
  const auto np = model.forward(ner_ids);
  const auto sp = model.forward(sel_ids);
  auto analytic = model.gradients(tag_loss(model, np, gold).scaled(alpha));
  analytic += model.gradients(gen_loss(model, sp, phi, pool).scaled(1.0 - alpha));

  std::mt19937_64 rng(12);
  auto& p = model.parameters().values;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t i = rng() % p.size();
    const double keep = p[i];
    p[i] = keep + 1e-4;
    const double up = value(model);
    p[i] = keep - 1e-4;
    const double down = value(model);
    p[i] = keep;
    const double numeric = (up - down) / 2e-4;
    const double a = analytic.values[i];
    CHECK(std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}) < 1e-4);
  }
}

TEST_CASE("warmup schedule") {
  const LinearWarmupSchedule s(1.0, 100, 10);
  CHECK(s.rate(1) == doctest::Approx(0.1));
  CHECK(s.rate(5) == doctest::Approx(0.5));
  CHECK(s.rate(10) == doctest::Approx(1.0));
  CHECK(s.rate(55) == doctest::Approx(0.5));
  CHECK(s.rate(100) == 0.0);
  for (std::size_t t = 11; t < 100; ++t) {
    CHECK(s.rate(t + 1) - s.rate(t) == doctest::Approx(-1.0 / 90));
  }
  CHECK_THROWS_AS(LinearWarmupSchedule(0.0, 10, 1), ValidationError);
}

TEST_CASE("AdamW: one step by hand and decoupled decay") {
  AdamW opt(2, {0.9, 0.999, 1e-8, 0.1});
  ParameterVector p(2);
  p.values = {1.0, -2.0};
  Gradients g(2);
  g.values = {0.5, 0.0};
  opt.step(p, g, 0.01);
  // Bias-corrected first step: m_hat = g, v_hat = g^2, so the Adam update is lr * sign(g).
  CHECK(p.values[0] == doctest::Approx(1.0 - 0.01 * (0.5 / (0.5 + 1e-8) + 0.1 * 1.0)));
  CHECK(p.values[1] == doctest::Approx(-2.0 - 0.01 * (0.1 * -2.0)));
  CHECK(opt.steps() == 1);
}

TEST_CASE("global norm clipping") {
  Gradients g(2);
  g.values = {3.0, 4.0};
  CHECK(clip_global_norm(g, 1.0) == doctest::Approx(5.0));
  CHECK(std::sqrt(g.squared_norm()) == doctest::Approx(1.0));
  CHECK(g.values[0] == doctest::Approx(0.6));
  Gradients small(1);
  small.values = {0.5};
  clip_global_norm(small, 1.0);
  CHECK(small.values[0] == 0.5);
}

TEST_CASE("config validation and JSON") {
  auto cfg = TrainConfig::desk_profile();
  CHECK_NOTHROW(cfg.validate());
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = TrainConfig::desk_profile();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = TrainConfig::desk_profile();
  cfg.alpha = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.use_prompts = false;
  CHECK_NOTHROW(cfg.validate());
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);

  cfg = TrainConfig::desk_profile();
  cfg.seed = 99;
  cfg.mode = TrainMode::prompt_tune;
  CHECK(TrainConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
  const auto partial = TrainConfig::from_json({{"alpha", 0.5}});
  CHECK(partial.alpha == 0.5);
  CHECK(partial.k == TrainConfig::desk_profile().k);
  CHECK_THROWS_AS(TrainConfig::from_json({{"alpha", "high"}}), ValidationError);

  CHECK(TrainConfig::paper_profile().k == 40);
  CHECK(TrainConfig::paper_profile().batch_size == 4);
  CHECK(TrainConfig::paper_profile().learning_rate == 2e-5);
  CHECK(alpha_grid() == std::vector<double>{0.1, 0.25, 0.5, 0.75, 0.9});
}

TEST_CASE("epochs = 0 is rejected by train") {
  const auto data = separable(1, 8);
  auto cfg = small_config();
  cfg.epochs = 0;
  CHECK_THROWS_AS(train_baseline(data, data, cfg), ValidationError);
  CHECK_THROWS_AS(train(data, data, extract_trfs(data, 3.0, 10), cfg), ValidationError);
  cfg.epochs = 1;
  CHECK_THROWS_AS(train_baseline(Corpus{}, data, cfg), ValidationError);
  CHECK_THROWS_AS(train_baseline(data, Corpus{}, cfg), ValidationError);
}

TEST_CASE("baseline fits linearly separable toy tags") {
  const auto train_set = separable(2, 60);
  const auto dev_set = separable(3, 20);
  auto cfg = small_config();
  cfg.epochs = 8;
  cfg.unk_replace = 0.0;
  cfg.model.init_std = 0.1;
  cfg.mode = TrainMode::fine_tune;
  const auto state = train_baseline(train_set, dev_set, cfg);
  CHECK(state.best_dev_f1 == doctest::Approx(1.0));
  CHECK(evaluate(state.best, dev_set).scores.micro_f1() == doctest::Approx(1.0));
}

TEST_CASE("training is deterministic under a fixed seed") {
  const auto train_set = separable(4, 24);
  const auto dev_set = separable(5, 8);
  const auto cfg = small_config();
  const auto trfs = extract_trfs(train_set, 3.0, 10);
  const auto a = train(train_set, dev_set, trfs, cfg);
  const auto b = train(train_set, dev_set, trfs, cfg);
  CHECK(a.steps == b.steps);
  CHECK(a.epochs == b.epochs);
  CHECK(a.best.model() == b.best.model());

  auto threaded = cfg;
  threaded.threads = 3;
  const auto c = train(train_set, dev_set, trfs, threaded);
  CHECK(c.steps == a.steps);
}

TEST_CASE("alpha = 1 with prompts disabled reproduces the baseline") {
  const auto train_set = separable(6, 24);
  const auto dev_set = separable(7, 8);
  auto cfg = small_config();
  cfg.alpha = 1.0;
  cfg.use_prompts = false;
  const auto trfs = extract_trfs(train_set, 3.0, 10);
  const auto joint = train(train_set, dev_set, trfs, cfg);
  const auto base = train_baseline(train_set, dev_set, cfg);
  CHECK(joint.steps == base.steps);
  CHECK(joint.epochs == base.epochs);
  CHECK(joint.best.model() == base.best.model());
}

TEST_CASE("early stopping keeps the best dev checkpoint") {
  const auto train_set = separable(8, 30);
  const auto dev_set = separable(9, 10);
  auto cfg = small_config();
  cfg.epochs = 4;
  const auto state = train(train_set, dev_set, extract_trfs(train_set, 3.0, 10), cfg);
  REQUIRE(state.epochs.size() == 4);
  double best = -1.0;
  for (std::size_t i = 0; i < state.epochs.size(); ++i) {
    best = std::max(best, state.epochs[i].dev_f1);
    CHECK(state.best_dev_history[i] == best);
    CHECK(std::isfinite(state.epochs[i].total));
  }
  CHECK(state.best_dev_f1 == best);
  CHECK(state.epochs[state.best_epoch - 1].dev_f1 == best);
  CHECK(evaluate(state.best, dev_set).scores.micro_f1() == doctest::Approx(best));
  for (const auto& s : state.steps) {
    CHECK(s.total == doctest::Approx(cfg.alpha * s.ner + (1.0 - cfg.alpha) * s.gen));
    CHECK(s.gen >= 0.0);
  }

  auto patient = cfg;
  patient.epochs = 30;
  patient.patience = 1;
  patient.learning_rate = 1e-9;
  const auto stopped = train(train_set, dev_set, extract_trfs(train_set, 3.0, 10), patient);
  CHECK(stopped.epochs_run < 30);
}

TEST_CASE("a diverging run aborts with a training error") {
  const auto data = separable(10, 12);
  auto cfg = small_config();
  cfg.learning_rate = 1e305;
  cfg.warmup_ratio = 0.0;
  cfg.weight_decay = 0.0;
  cfg.epochs = 3;
  CHECK_THROWS_AS(train_baseline(data, data, cfg), TrainingError);
}

TEST_CASE("tagger checkpoints reproduce predictions") {
  const auto train_set = separable(11, 20);
  auto cfg = small_config();
  cfg.mode = TrainMode::prompt_tune;
  const auto state = train(train_set, train_set, extract_trfs(train_set, 3.0, 10), cfg);
  const auto restored = Tagger::from_checkpoint(deserialize_checkpoint(serialize_checkpoint(state.best.to_checkpoint())));
  CHECK(restored.mode() == TrainMode::prompt_tune);
  CHECK(restored.label_words() == state.best.label_words());
  CHECK(restored.trfs() == state.best.trfs());
  for (const auto& s : train_set) {
    CHECK(restored.predict(s) == state.best.predict(s));
    CHECK(restored.entity_prompt(s).rendered == state.best.entity_prompt(s).rendered);
    CHECK(is_valid_bioes(restored.predict(s)));
  }
}
