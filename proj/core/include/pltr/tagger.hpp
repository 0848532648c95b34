#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pltr/checkpoint.hpp"
#include "pltr/encoder.hpp"
#include "pltr/losses.hpp"
#include "pltr/prompting.hpp"
#include "pltr/trf_mining.hpp"

namespace pltr {

enum class TrainMode { fine_tune, prompt_tune };

TrainMode parse_train_mode(std::string_view name);
std::string_view to_string(TrainMode mode);

struct PromptSettings {
  bool enabled = true;
  std::size_t k = kDeskSelectedTrfs;
};

/// A trained encoder bundled with everything inference needs: the TRF pool, the
/// prompt settings and (prompt-tuning mode) the label-word map.
class Tagger {
 public:
  Tagger() = default;
  Tagger(EncoderModel model, TrfSet trfs, TrainMode mode, PromptSettings prompts, LabelWords label_words = {});

  const EncoderModel& model() const { return model_; }
  EncoderModel& model() { return model_; }
  const TrfSet& trfs() const { return trfs_; }
  const TrfPool& pool() const { return pool_; }
  TrainMode mode() const { return mode_; }
  const PromptSettings& prompts() const { return prompts_; }
  const LabelWords& label_words() const { return label_words_; }
  const std::vector<std::string>& types() const { return model_.tags().types(); }

  /// f'(x) built from the model's own TRF selection, or the bare sentence when
  /// prompts are disabled or the pool is empty.
  EntityPrompt entity_prompt(const Sentence& x) const;
  PromptedExample prompted_example(const Sentence& x) const;

  /// Predicted labels for the sentence positions (always a valid BIOES walk).
  std::vector<EntityLabel> predict(const Sentence& x) const;

  Checkpoint to_checkpoint() const;
  static Tagger from_checkpoint(Checkpoint checkpoint);

 private:
  EncoderModel model_;
  TrfSet trfs_;
  TrfPool pool_;
  TrainMode mode_ = TrainMode::fine_tune;
  PromptSettings prompts_;
  LabelWords label_words_;
};

/// Tag argmax per position, decoded strictly and re-encoded as BIOES.
std::vector<EntityLabel> decode_tag_output(const ForwardOutput& out, const TagSet& tags, std::size_t length);
/// Label-word argmax per position; runs of the same type's label word form one entity.
std::vector<EntityLabel> decode_label_word_output(const ForwardOutput& out, const Vocabulary& vocab,
                                                  const LabelWords& words, std::size_t length);

}  // namespace pltr
