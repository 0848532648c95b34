#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "pltr/corpus.hpp"
#include "pltr/encoder.hpp"
#include "pltr/trf_mining.hpp"

namespace pltr {

/// Mean token-level negative log-likelihood of the gold tags over the first
/// `gold.size()` positions (prompt suffix positions are not scored).
LossNode tag_loss(const EncoderModel& model, const ForwardPass& pass, std::span<const int> gold);

/// Label-word map M: entity type -> label word.
using LabelWords = std::map<std::string, std::string>;

/// Most frequent single-token entity surface form per type in the corpus
/// (ties resolved lexicographically; words are kept distinct across types).
LabelWords default_label_words(const Corpus& corpus);

/// x^Ent: entity positions replaced by M(type), other positions keep their token.
std::vector<std::string> entlm_targets(const Sentence& sentence, const LabelWords& words);

/// Mean NLL of the target tokens under the tied vocabulary head. The pass must
/// have been run with the LM head enabled.
LossNode entlm_loss(const EncoderModel& model, const ForwardPass& pass, std::span<const std::string> targets);

/// Softmax of r . h over the candidate token ids (the mask-fill distribution).
std::vector<double> restricted_softmax(const EncoderModel& model, std::span<const double> hidden,
                                       std::span<const int> candidate_ids);

/// -(1/K) sum_i log p([MASK]_i = phi_i) with p restricted to the pool.
LossNode gen_loss(const EncoderModel& model, const ForwardPass& pass, std::span<const std::string> phi,
                  const TrfPool& pool);

/// alpha * ner + (1 - alpha) * gen, alpha in (0, 1).
double total_loss(double l_ner, double l_gen, double alpha);

}  // namespace pltr
