#include "pltr/tagger.hpp"

#include <algorithm>

#include "pltr/error.hpp"

namespace pltr {

TrainMode parse_train_mode(std::string_view name) {
  if (name == "fine_tune" || name == "fine-tune") return TrainMode::fine_tune;
  if (name == "prompt_tune" || name == "prompt-tune" || name == "entlm") return TrainMode::prompt_tune;
  throw ValidationError("unknown training mode '" + std::string(name) + "'");
}

std::string_view to_string(TrainMode mode) {
  return mode == TrainMode::fine_tune ? "fine_tune" : "prompt_tune";
}

Tagger::Tagger(EncoderModel model, TrfSet trfs, TrainMode mode, PromptSettings prompts, LabelWords label_words)
    : model_(std::move(model)),
      trfs_(std::move(trfs)),
      pool_(trfs_.pool()),
      mode_(mode),
      prompts_(prompts),
      label_words_(std::move(label_words)) {
  if (prompts_.enabled && prompts_.k < 1) throw ValidationError("K must be >= 1");
  if (mode_ == TrainMode::prompt_tune && label_words_.empty()) {
    throw ValidationError("prompt-tuning mode needs a label-word map");
  }
}

EntityPrompt Tagger::entity_prompt(const Sentence& x) const {
  if (!prompts_.enabled || pool_.empty()) return build_entity_prompt(x.tokens, {}, types());
  const auto selected = select_relevant_trfs(x, pool_, prompts_.k, model_);
  return build_entity_prompt(x, selected, types());
}

PromptedExample Tagger::prompted_example(const Sentence& x) const {
  PromptedExample ex;
  ex.sentence = x;
  if (prompts_.enabled && !pool_.empty()) {
    ex.selected = select_relevant_trfs(x, pool_, prompts_.k, model_);
    ex.phi = phi_labels(x, pool_, prompts_.k, model_);
  }
  ex.prompt = build_entity_prompt(x, ex.selected, types());
  return ex;
}

std::vector<EntityLabel> decode_tag_output(const ForwardOutput& out, const TagSet& tags, std::size_t length) {
  std::vector<EntityLabel> raw;
  raw.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    const auto lp = out.tag_logprobs_at(i);
    const auto best = std::max_element(lp.begin(), lp.end()) - lp.begin();
    raw.push_back(tags.label(static_cast<int>(best)));
  }
  return encode_spans(decode_spans(raw), length);
}

std::vector<EntityLabel> decode_label_word_output(const ForwardOutput& out, const Vocabulary& vocab,
                                                  const LabelWords& words, std::size_t length) {
  std::vector<std::string> type_at(length);
  for (std::size_t i = 0; i < length; ++i) {
    const auto lp = out.lm_logprobs_at(i);
    const auto best = static_cast<int>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    for (const auto& [type, word] : words) {
      if (vocab.contains(word) && vocab.id(word) == best) {
        type_at[i] = type;
        break;
      }
    }
  }
  std::vector<Span> spans;
  for (std::size_t i = 0; i < length;) {
    if (type_at[i].empty()) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < length && type_at[j] == type_at[i]) ++j;
    spans.push_back({i, j, type_at[i]});
    i = j;
  }
  return encode_spans(spans, length);
}

std::vector<EntityLabel> Tagger::predict(const Sentence& x) const {
  const auto prompt = entity_prompt(x);
  const auto ids = model_.vocab().encode(prompt.tokens);
  const auto pass = model_.forward(ids, mode_ == TrainMode::prompt_tune);
  const std::size_t n = std::min(x.size(), pass.length());
  auto labels = mode_ == TrainMode::fine_tune
                    ? decode_tag_output(pass.output(), model_.tags(), n)
                    : decode_label_word_output(pass.output(), model_.vocab(), label_words_, n);
  labels.resize(x.size());  // positions lost to truncation are O
  return labels;
}

Checkpoint Tagger::to_checkpoint() const {
  Checkpoint ck;
  ck.model = model_;
  ck.metadata["trfs"] = trfs_.to_json();
  ck.metadata["mode"] = std::string(to_string(mode_));
  ck.metadata["prompts"] = {{"enabled", prompts_.enabled}, {"k", prompts_.k}};
  ck.metadata["label_words"] = label_words_;
  return ck;
}

Tagger Tagger::from_checkpoint(Checkpoint checkpoint) {
  const auto& meta = checkpoint.metadata;
  try {
    PromptSettings prompts;
    prompts.enabled = meta.at("prompts").at("enabled").get<bool>();
    prompts.k = meta.at("prompts").at("k").get<std::size_t>();
    return Tagger(std::move(checkpoint.model), TrfSet::from_json(meta.at("trfs")),
                  parse_train_mode(meta.at("mode").get<std::string>()), prompts,
                  meta.value("label_words", LabelWords{}));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint is missing tagger metadata: ") + e.what());
  }
}

}  // namespace pltr
