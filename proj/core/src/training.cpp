#include "pltr/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <thread>

#include "pltr/error.hpp"
#include "pltr/eval.hpp"
#include "pltr/log.hpp"

namespace pltr {
namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct ExampleResult {
  Gradients grad;
  double ner = 0.0;
  double gen = 0.0;
};

class Trainer {
 public:
  Trainer(const Corpus& train_set, const Corpus& dev_set, const TrfSet& trfs, const TrainConfig& cfg)
      : train_(train_set), dev_(dev_set), trfs_(trfs), cfg_(cfg) {}

  TrainState run();

 private:
  ExampleResult example_step(const EncoderModel& model, const Sentence& x, std::uint64_t noise_seed) const;
  Sentence with_unk_noise(const Sentence& x, std::uint64_t noise_seed) const;

  const Corpus& train_;
  const Corpus& dev_;
  const TrfSet& trfs_;
  const TrainConfig& cfg_;
  TrfPool pool_;
  LabelWords label_words_;
  std::map<std::string, std::size_t> token_counts_;
  bool uses_trfs_ = false;
  bool gen_active_ = false;
};

Sentence Trainer::with_unk_noise(const Sentence& x, std::uint64_t noise_seed) const {
  if (cfg_.unk_replace <= 0.0) return x;
  Sentence noisy = x;
  std::mt19937_64 rng(noise_seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (auto& t : noisy.tokens) {
    auto it = token_counts_.find(t);
    const bool singleton = it != token_counts_.end() && it->second == 1;
    if (coin(rng) < cfg_.unk_replace && singleton) t = std::string(kUnkToken);
  }
  return noisy;
}

ExampleResult Trainer::example_step(const EncoderModel& model, const Sentence& original,
                                    std::uint64_t noise_seed) const {
  const Sentence x = with_unk_noise(original, noise_seed);
  const auto& vocab = model.vocab();
  ExampleResult result;

  std::vector<std::string> ner_input = x.tokens;
  std::optional<ForwardPass> selection_pass;
  if (uses_trfs_) {
    const auto prompt = build_selection_prompt(x, cfg_.k);
    selection_pass.emplace(model.forward(vocab.encode(prompt.tokens)));
    if (cfg_.use_prompts) {
      const auto selected = select_from_output(selection_pass->output(), pool_, model);
      ner_input = build_entity_prompt(x, selected, model.tags().types()).tokens;
    }
  }

  const bool lm = cfg_.mode == TrainMode::prompt_tune;
  const auto ner_pass = model.forward(vocab.encode(ner_input), lm);
  LossNode ner;
  if (lm) {
    const auto targets = entlm_targets(x, label_words_);
    ner = entlm_loss(model, ner_pass, targets);
  } else {
    std::vector<int> gold;
    gold.reserve(x.size());
    for (const auto& l : x.labels) gold.push_back(model.tags().index(l));
    gold.resize(std::min(gold.size(), ner_pass.length()));
    ner = tag_loss(model, ner_pass, gold);
  }
  result.ner = ner.value;

  if (gen_active_) {
    const auto phi = phi_labels(x, pool_, cfg_.k, model);
    const LossNode gen = gen_loss(model, *selection_pass, phi.tokens, pool_);
    result.gen = gen.value;
    result.grad = model.gradients(ner.scaled(cfg_.alpha));
    result.grad += model.gradients(gen.scaled(1.0 - cfg_.alpha));
  } else {
    result.grad = model.gradients(ner);
  }
  return result;
}

TrainState Trainer::run() {
  cfg_.validate();
  if (train_.empty()) throw ValidationError("training corpus is empty");
  if (dev_.empty()) throw ValidationError("development corpus is empty");

  uses_trfs_ = cfg_.use_prompts || cfg_.alpha < 1.0;
  gen_active_ = cfg_.alpha < 1.0;
  if (uses_trfs_) {
    pool_ = trfs_.pool();
    if (pool_.empty()) throw ValidationError("prompted training needs a non-empty TRF set");
  }
  for (const auto& s : train_) {
    for (const auto& t : s.tokens) ++token_counts_[t];
  }
  if (cfg_.mode == TrainMode::prompt_tune) label_words_ = default_label_words(train_);

  ModelConfig mc = cfg_.model;
  mc.seed = cfg_.seed;
  EncoderModel model(mc,
                     build_training_vocabulary(train_, uses_trfs_ ? &trfs_ : nullptr, label_words_,
                                               cfg_.vocab_min_count),
                     TagSet(train_.type_inventory()));
  const PromptSettings prompts{cfg_.use_prompts, cfg_.k};
  const TrfSet empty_trfs(train_.type_inventory(), std::vector<std::vector<TrfEntry>>(train_.type_inventory().size()),
                          cfg_.rho, cfg_.l);
  const TrfSet& tagger_trfs = uses_trfs_ ? trfs_ : empty_trfs;

  const std::size_t steps_per_epoch = (train_.size() + cfg_.batch_size - 1) / cfg_.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg_.epochs;
  const auto warmup = static_cast<std::size_t>(std::ceil(cfg_.warmup_ratio * static_cast<double>(total_steps)));
  const LinearWarmupSchedule schedule(cfg_.learning_rate, total_steps, warmup);

  TrainState state;
  state.optimizer = AdamW(model.parameters().size(), {0.9, 0.999, 1e-8, cfg_.weight_decay});
  state.best = Tagger(model, tagger_trfs, cfg_.mode, prompts, label_words_);

  std::vector<std::size_t> order(train_.size());
  std::mt19937_64 shuffle_rng(mix_seed(cfg_.seed, 0x5348));
  std::size_t step = 0;
  std::size_t stale = 0;

  for (std::size_t epoch = 1; epoch <= cfg_.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochTrace et;
    et.epoch = epoch;

    for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
      const std::size_t bsz = end - start;
      std::vector<ExampleResult> results(bsz);
      auto work = [&](std::size_t b) {
        const std::size_t idx = order[start + b];
        results[b] = example_step(model, train_[idx], mix_seed(cfg_.seed, mix_seed(epoch, idx)));
      };
      const std::size_t threads = std::max<std::size_t>(1, std::min(cfg_.threads, bsz));
      if (threads == 1) {
        for (std::size_t b = 0; b < bsz; ++b) work(b);
      } else {
        std::vector<std::jthread> workers;
        for (std::size_t w = 0; w < threads; ++w) {
          workers.emplace_back([&, w] {
            for (std::size_t b = w; b < bsz; b += threads) work(b);
          });
        }
      }

      Gradients grad(model.parameters().size());
      StepTrace st;
      for (const auto& r : results) {
        grad += r.grad;
        st.ner += r.ner;
        st.gen += r.gen;
      }
      const double inv = 1.0 / static_cast<double>(bsz);
      grad *= inv;
      st.ner *= inv;
      st.gen *= inv;
      st.total = gen_active_ ? total_loss(st.ner, st.gen, cfg_.alpha) : st.ner;
      if (!std::isfinite(st.total)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step + 1) +
                            " (ner=" + std::to_string(st.ner) + ", gen=" + std::to_string(st.gen) + ")");
      }
      clip_global_norm(grad, cfg_.grad_clip);
      ++step;
      st.learning_rate = schedule.rate(step);
      state.optimizer.step(model.parameters(), grad, st.learning_rate);
      state.steps.push_back(st);
      et.ner += st.ner;
      et.gen += st.gen;
      et.total += st.total;
    }
    const double steps = static_cast<double>(steps_per_epoch);
    et.ner /= steps;
    et.gen /= steps;
    et.total /= steps;

    const Tagger snapshot(model, tagger_trfs, cfg_.mode, prompts, label_words_);
    et.dev_f1 = evaluate(snapshot, dev_, cfg_.threads).scores.micro_f1();
    state.epochs.push_back(et);
    state.epochs_run = epoch;
    log::info("train.epoch", {{"epoch", epoch},
                              {"ner", et.ner},
                              {"gen", et.gen},
                              {"total", et.total},
                              {"dev_f1", et.dev_f1}});

    if (et.dev_f1 > state.best_dev_f1) {
      state.best_dev_f1 = et.dev_f1;
      state.best_epoch = epoch;
      state.best = snapshot;
      stale = 0;
    } else {
      ++stale;
    }
    state.best_dev_history.push_back(state.best_dev_f1);
    if (cfg_.patience > 0 && stale >= cfg_.patience) break;
  }
  return state;
}

}  // namespace

TrainConfig TrainConfig::paper_profile() {
  TrainConfig c;
  c.k = kDefaultSelectedTrfs;
  c.epochs = 10;
  c.batch_size = 4;
  c.learning_rate = 2e-5;
  c.warmup_ratio = 0.1;
  return c;
}

TrainConfig TrainConfig::desk_profile() {
  TrainConfig c;
  c.alpha = 0.9;
  c.l = 30;
  c.k = kDeskSelectedTrfs;
  c.mode = TrainMode::prompt_tune;
  c.epochs = 20;
  c.batch_size = 4;
  c.learning_rate = 3e-3;
  c.warmup_ratio = 0.1;
  c.unk_replace = 0.5;
  c.model.dim = 32;
  c.model.depth = 2;
  c.model.heads = 2;
  c.model.ffn_dim = 64;
  c.model.init_std = 0.02;
  return c;
}

void TrainConfig::validate() const {
  if (use_prompts) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1) when prompts are enabled");
  } else if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw ValidationError("alpha must lie in (0, 1]");
  }
  if (!(rho >= 1.0)) throw ValidationError("rho must be >= 1");
  if (l < 1) throw ValidationError("l must be >= 1");
  if (k < 1) throw ValidationError("K must be >= 1");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(warmup_ratio >= 0.0 && warmup_ratio <= 1.0)) throw ValidationError("warmup_ratio must lie in [0, 1]");
  if (!(unk_replace >= 0.0 && unk_replace <= 1.0)) throw ValidationError("unk_replace must lie in [0, 1]");
  if (vocab_min_count < 1) throw ValidationError("vocab_min_count must be >= 1");
  model.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"alpha", alpha},
          {"rho", rho},
          {"l", l},
          {"k", k},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"warmup_ratio", warmup_ratio},
          {"weight_decay", weight_decay},
          {"grad_clip", grad_clip},
          {"seed", seed},
          {"mode", std::string(to_string(mode))},
          {"use_prompts", use_prompts},
          {"patience", patience},
          {"vocab_min_count", vocab_min_count},
          {"unk_replace", unk_replace},
          {"threads", threads},
          {"model", model.to_json()}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j, const TrainConfig& base) {
  TrainConfig c = base;
  try {
    c.alpha = j.value("alpha", c.alpha);
    c.rho = j.value("rho", c.rho);
    c.l = j.value("l", c.l);
    c.k = j.value("k", c.k);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.warmup_ratio = j.value("warmup_ratio", c.warmup_ratio);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.seed = j.value("seed", c.seed);
    if (j.contains("mode")) c.mode = parse_train_mode(j.at("mode").get<std::string>());
    c.use_prompts = j.value("use_prompts", c.use_prompts);
    c.patience = j.value("patience", c.patience);
    c.vocab_min_count = j.value("vocab_min_count", c.vocab_min_count);
    c.unk_replace = j.value("unk_replace", c.unk_replace);
    c.threads = j.value("threads", c.threads);
    if (j.contains("model")) {
      nlohmann::json m = c.model.to_json();
      m.update(j.at("model"));
      c.model = ModelConfig::from_json(m);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed training config: ") + e.what());
  }
  return c;
}

nlohmann::json TrainState::trace_json() const {
  nlohmann::json j;
  j["best_dev_f1"] = best_dev_f1;
  j["best_epoch"] = best_epoch;
  j["epochs_run"] = epochs_run;
  nlohmann::json ep = nlohmann::json::array();
  for (const auto& e : epochs) {
    ep.push_back({{"epoch", e.epoch}, {"ner", e.ner}, {"gen", e.gen}, {"total", e.total}, {"dev_f1", e.dev_f1}});
  }
  j["epochs"] = ep;
  nlohmann::json st = nlohmann::json::array();
  for (const auto& s : steps) st.push_back({s.ner, s.gen, s.total, s.learning_rate});
  j["steps"] = st;
  j["best_dev_history"] = best_dev_history;
  return j;
}

Vocabulary build_training_vocabulary(const Corpus& train_set, const TrfSet* trfs, const LabelWords& words,
                                     std::size_t min_count) {
  std::vector<std::string> extra = prompt_vocabulary(train_set.type_inventory());
  if (trfs) {
    for (const auto& token : trfs->pool().tokens) extra.push_back(token);
  }
  for (const auto& [_, word] : words) extra.push_back(word);
  return Vocabulary::build(train_set, extra, min_count);
}

TrainState train(const Corpus& train_set, const Corpus& dev_set, const TrfSet& trfs, const TrainConfig& cfg) {
  return Trainer(train_set, dev_set, trfs, cfg).run();
}

TrainState train_baseline(const Corpus& train_set, const Corpus& dev_set, TrainConfig cfg) {
  cfg.use_prompts = false;
  cfg.alpha = 1.0;
  const TrfSet none(train_set.type_inventory(), std::vector<std::vector<TrfEntry>>(train_set.type_inventory().size()),
                    cfg.rho, cfg.l);
  return Trainer(train_set, dev_set, none, cfg).run();
}

}  // namespace pltr
