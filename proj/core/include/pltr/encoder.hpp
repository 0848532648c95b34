#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pltr/vocabulary.hpp"

namespace pltr {

inline constexpr std::size_t kMaxSequenceLength = 256;

struct ModelConfig {
  std::size_t dim = 64;
  std::size_t depth = 2;
  std::size_t heads = 2;
  std::size_t ffn_dim = 128;
  std::size_t max_len = kMaxSequenceLength;
  double init_std = 0.02;
  std::uint64_t seed = 13;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  void validate() const;
};

/// Tag inventory for the tagging head: O, then B/I/E/S for each type in order.
class TagSet {
 public:
  TagSet() = default;
  explicit TagSet(std::vector<std::string> types);

  const std::vector<std::string>& types() const { return types_; }
  std::size_t size() const { return 1 + 4 * types_.size(); }
  int index(const EntityLabel& label) const;
  EntityLabel label(int index) const;

  friend bool operator==(const TagSet&, const TagSet&) = default;

 private:
  std::vector<std::string> types_;
};

/// Result of one encoder pass over a single sequence.
struct ForwardOutput {
  std::size_t length = 0;
  std::size_t dim = 0;
  std::size_t num_tags = 0;
  std::size_t vocab_size = 0;
  std::vector<double> hidden;        // length x dim, final layer
  std::vector<double> tag_logprobs;  // length x num_tags
  std::vector<double> lm_logprobs;   // length x vocab_size, only when requested
  std::vector<std::size_t> mask_positions;
  bool truncated = false;

  std::span<const double> hidden_at(std::size_t i) const { return {hidden.data() + i * dim, dim}; }
  std::span<const double> tag_logprobs_at(std::size_t i) const {
    return {tag_logprobs.data() + i * num_tags, num_tags};
  }
  std::span<const double> lm_logprobs_at(std::size_t i) const {
    return {lm_logprobs.data() + i * vocab_size, vocab_size};
  }
};

/// Anything that can encode token sequences and expose static token embeddings.
/// Prompt construction and analysis only depend on this surface.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual std::size_t dim() const = 0;
  virtual ForwardOutput encode(std::span<const std::string> tokens) const = 0;
  /// Context-free input embedding of a token.
  virtual std::vector<double> token_embedding(std::string_view token) const = 0;
};

/// Flat parameter (or gradient) vector; layout is owned by EncoderModel.
struct ParameterVector {
  std::vector<double> values;

  ParameterVector() = default;
  explicit ParameterVector(std::size_t n) : values(n, 0.0) {}

  std::size_t size() const { return values.size(); }
  ParameterVector& operator+=(const ParameterVector& other);
  ParameterVector& operator*=(double s);
  double squared_norm() const;
};

using Gradients = ParameterVector;

class ForwardPass;

/// A scalar loss attached to one forward pass: its value plus the gradient with
/// respect to the final hidden states and any head/embedding parameters read directly.
struct LossNode {
  double value = 0.0;
  const ForwardPass* pass = nullptr;
  std::vector<double> d_hidden;
  Gradients direct;

  LossNode scaled(double s) const;
  LossNode& operator+=(const LossNode& other);
};

/// Small pre-LayerNorm self-attention encoder with a tagging head, a tied
/// vocabulary head (label-word prediction) and tied mask-fill scoring.
class EncoderModel : public Encoder {
 public:
  struct Layout {
    std::size_t tok_emb = 0, pos_emb = 0;
    struct Layer {
      std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
    };
    std::vector<Layer> layers;
    std::size_t lnf_g = 0, lnf_b = 0, tag_w = 0, tag_b = 0, lm_b = 0;
    std::size_t total = 0;
  };

  EncoderModel() = default;
  EncoderModel(ModelConfig config, Vocabulary vocab, TagSet tags);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const TagSet& tags() const { return tags_; }
  const Layout& layout() const { return layout_; }

  ParameterVector& parameters() { return params_; }
  const ParameterVector& parameters() const { return params_; }

  std::size_t dim() const override { return config_.dim; }
  ForwardOutput encode(std::span<const std::string> tokens) const override;
  std::vector<double> token_embedding(std::string_view token) const override;
  std::span<const double> embedding_row(int id) const;

  /// Forward pass over token ids; keeps every activation needed for backward.
  /// Sequences longer than max_len are truncated (and logged).
  ForwardPass forward(std::span<const int> ids, bool with_lm_head = false) const;

  /// Exact gradient of `loss` with respect to every parameter.
  Gradients gradients(const LossNode& loss) const;

  friend bool operator==(const EncoderModel& a, const EncoderModel& b) {
    return a.vocab_ == b.vocab_ && a.tags_ == b.tags_ && a.params_.values == b.params_.values &&
           a.config_.to_json() == b.config_.to_json();
  }

 private:
  void build_layout();
  void initialize();

  ModelConfig config_;
  Vocabulary vocab_;
  TagSet tags_;
  Layout layout_;
  ParameterVector params_;
};

/// Activations of one forward pass, kept for backpropagation.
class ForwardPass {
 public:
  const ForwardOutput& output() const { return out_; }
  const std::vector<int>& ids() const { return ids_; }
  std::size_t length() const { return out_.length; }

 private:
  friend class EncoderModel;
  struct LayerCache {
    std::vector<double> x_in, a, xhat1, rstd1, q, k, v, probs, ctx, x_mid, b, xhat2, rstd2, h1, g;
  };
  std::vector<int> ids_;
  std::vector<LayerCache> layers_;
  std::vector<double> x_out, xhatf, rstdf;
  std::vector<double> tag_logits;
  ForwardOutput out_;
};

}  // namespace pltr
