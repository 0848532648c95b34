#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "pltr/corpus.hpp"
#include "pltr/optimizer.hpp"
#include "pltr/tagger.hpp"
#include "pltr/trf_mining.hpp"

namespace pltr {

/// The loss-weight grid searched by `pltr sweep`.
inline const std::vector<double>& alpha_grid() {
  static const std::vector<double> grid{0.1, 0.25, 0.5, 0.75, 0.9};
  return grid;
}

struct TrainConfig {
  double alpha = 0.75;
  double rho = kDefaultRho;
  std::size_t l = kDefaultTrfsPerType;
  std::size_t k = kDeskSelectedTrfs;
  std::size_t epochs = 10;
  std::size_t batch_size = 4;
  double learning_rate = 2e-5;
  double warmup_ratio = 0.1;
  double weight_decay = 0.01;
  double grad_clip = 1.0;
  std::uint64_t seed = 13;
  TrainMode mode = TrainMode::fine_tune;
  bool use_prompts = true;
  std::size_t patience = 0;  // 0: run every epoch, keep the best
  std::size_t vocab_min_count = 1;
  double unk_replace = 0.0;  // probability of replacing a singleton training token by [UNK]
  std::size_t threads = 1;
  ModelConfig model;

  /// Settings reported for full pre-trained backbones (batch 4, lr 2e-5, K 40).
  static TrainConfig paper_profile();
  /// Settings for the from-scratch desk-scale encoder.
  static TrainConfig desk_profile();

  /// Throws ValidationError. With prompts enabled alpha must lie in (0, 1);
  /// a prompt-free run may use alpha = 1 (the plain fine-tuning baseline).
  void validate() const;

  nlohmann::json to_json() const;
  /// Fields missing from `j` keep their value from `base`.
  static TrainConfig from_json(const nlohmann::json& j, const TrainConfig& base = desk_profile());
};

struct StepTrace {
  double ner = 0.0;
  double gen = 0.0;
  double total = 0.0;
  double learning_rate = 0.0;

  friend bool operator==(const StepTrace&, const StepTrace&) = default;
};

struct EpochTrace {
  std::size_t epoch = 0;
  double ner = 0.0;
  double gen = 0.0;
  double total = 0.0;
  double dev_f1 = 0.0;

  friend bool operator==(const EpochTrace&, const EpochTrace&) = default;
};

struct TrainState {
  Tagger best;
  AdamW optimizer;
  double best_dev_f1 = -1.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::vector<StepTrace> steps;
  std::vector<EpochTrace> epochs;
  std::vector<double> best_dev_history;  // running maximum after each epoch

  nlohmann::json trace_json() const;
};

/// Joint training: per example, select TRFs with the current model, render f'(x),
/// and optimise alpha * L'_NER + (1 - alpha) * L_gen with AdamW under a linear
/// warmup schedule. Returns the checkpoint with the best dev micro-F1.
TrainState train(const Corpus& train_set, const Corpus& dev_set, const TrfSet& trfs, const TrainConfig& cfg);

/// Same loop on bare sentences, without L_gen.
TrainState train_baseline(const Corpus& train_set, const Corpus& dev_set, TrainConfig cfg);

/// Vocabulary for a training run (corpus tokens, prompt literals, type names, TRFs, label words).
Vocabulary build_training_vocabulary(const Corpus& train_set, const TrfSet* trfs, const LabelWords& words,
                                     std::size_t min_count);

}  // namespace pltr
