#pragma once

// Tiny pre-norm encoder-decoder transformer with soft-prompt prepending.
//
// The soft prompt P [l x d] is row-concatenated in front of the input
// embeddings of every encoder sequence; prompt rows take positions 0..l-1
// and the input tokens follow. The decoder starts from BOS and never sees
// the prompt except through cross-attention. The output projection is tied
// to the token embedding table.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fastpt/autodiff.hpp"
#include "fastpt/partial_spec.hpp"
#include "fastpt/rng.hpp"
#include "fastpt/tensor.hpp"

namespace fastpt {

struct ModelConfig {
  int enc_layers = 4;
  int dec_layers = 4;
  int d_model = 64;
  int d_ff = 128;
  int n_heads = 4;
  int vocab_size = 32;
  int prompt_len = 20;
  int max_len = 32;
  /// Projection weights are N(0, (init_scale / sqrt(fan_in))^2).
  float init_scale = 1.0F;
  /// Token and position embeddings are N(0, embed_std^2).
  float embed_std = 0.3F;

  void validate() const;
  int head_dim() const { return d_model / n_heads; }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct AttentionWeights {
  Tensor wq, wk, wv, wo;  // [d, d]
};

struct FfnWeights {
  Tensor w1;  // [d, d_ff]
  Tensor b1;  // [d_ff]
  Tensor w2;  // [d_ff, d]
  Tensor b2;  // [d]
};

struct EncoderLayer {
  Tensor attn_norm;
  AttentionWeights self_attn;
  Tensor ffn_norm;
  FfnWeights ffn;
};

struct DecoderLayer {
  Tensor self_norm;
  AttentionWeights self_attn;
  Tensor cross_norm;
  AttentionWeights cross_attn;
  Tensor ffn_norm;
  FfnWeights ffn;
};

struct ModelWeights {
  ModelConfig config;
  Tensor embed;    // [V, d], tied with the output projection
  Tensor enc_pos;  // [max_len, d]
  Tensor dec_pos;  // [max_len, d]
  std::vector<EncoderLayer> encoder;
  std::vector<DecoderLayer> decoder;
  Tensor enc_final_norm;
  Tensor dec_final_norm;

  /// Stable (name, tensor) enumeration used by serialization and optimizers.
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;

  friend bool operator==(const ModelWeights& a, const ModelWeights& b);
};

struct SoftPrompt {
  Tensor values;  // [l, d]

  std::size_t length() const { return values.rows(); }
  std::size_t width() const { return values.cols(); }
  void validate(const ModelConfig& config) const;
  friend bool operator==(const SoftPrompt&, const SoftPrompt&) = default;
};

struct Example {
  std::vector<int> input;
  std::vector<int> target;  // without EOS; the model appends it
  friend bool operator==(const Example&, const Example&) = default;
};

/// Ragged batch: each example keeps its own length, so no padding enters
/// the computation. padding_mask() reports the equivalent dense mask.
struct TokenBatch {
  std::vector<Example> examples;
  /// Optional per-example shift of encoder position ids (pretraining only).
  std::vector<int> enc_offsets;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  std::vector<std::vector<std::uint8_t>> padding_mask() const;
};

ModelWeights init_weights(const ModelConfig& config, Rng& rng);

SoftPrompt init_prompt(const ModelConfig& config, Rng& rng, float stddev = 0.3F);

/// Frozen weights specialised to a PartialSpec: retained layers in original
/// order, FFN matrices physically shrunk to the active neurons.
class ModelView {
 public:
  struct FfnRef {
    const FfnWeights* weights = nullptr;
    std::shared_ptr<const FfnWeights> shrunk;  // set when the mask drops neurons
  };
  struct EncoderRef {
    int index = 0;  // 1-based original position
    const EncoderLayer* layer = nullptr;
    FfnRef ffn;
  };
  struct DecoderRef {
    int index = 0;
    const DecoderLayer* layer = nullptr;
    FfnRef ffn;
  };

  ModelView(const ModelWeights& weights, const PartialSpec& spec);

  const ModelWeights& weights() const { return *weights_; }
  const ModelConfig& config() const { return weights_->config; }
  const PartialSpec& spec() const { return spec_; }
  const std::vector<EncoderRef>& encoder() const { return encoder_; }
  const std::vector<DecoderRef>& decoder() const { return decoder_; }

 private:
  const ModelWeights* weights_;
  PartialSpec spec_;
  std::vector<EncoderRef> encoder_;
  std::vector<DecoderRef> decoder_;
};

/// Records what a forward pass executed; used by structural tests.
struct ForwardProbe {
  std::vector<int> enc_layers_run;
  std::vector<int> dec_layers_run;
  std::vector<Shape> enc_attention;  // one score-matrix shape per (example, head, layer)
};

/// Builds the computation for one batch on a tape.
class ModelGraph {
 public:
  /// With train_weights the frozen tensors are bound as differentiable leaves.
  ModelGraph(ad::Tape& tape, const ModelView& view, bool train_weights = false);

  ad::Var param(const Tensor& t);

  /// Encoder output, packed rows of all examples, plus per-example row offsets.
  struct Encoded {
    ad::Var hidden;
    std::vector<std::size_t> offsets;
    std::vector<std::size_t> lengths;
  };
  Encoded encode(std::optional<ad::Var> prompt, const TokenBatch& batch);

  /// Decoder logits for given decoder inputs (each starting with BOS).
  ad::Var decode_logits(const Encoded& enc, const std::vector<std::vector<int>>& dec_inputs);

  /// Teacher-forced mean token cross-entropy; EOS is appended to each target.
  ad::Var loss(std::optional<ad::Var> prompt, const TokenBatch& batch, ad::Var* logits = nullptr);

  /// Tensors bound so far, in binding order.
  const std::vector<std::pair<const Tensor*, ad::Var>>& bound() const { return bound_; }

  void set_probe(ForwardProbe* probe) { probe_ = probe; }

  /// Input rows of each executed FFN: (layer key, normalized input).
  /// Populated only when capture_ffn_inputs is set.
  bool capture_ffn_inputs = false;
  std::vector<std::pair<std::string, ad::Var>> ffn_inputs;

 private:
  ad::Var attention(ad::Var q_in, ad::Var kv_in, const AttentionWeights& w,
                    const std::vector<std::size_t>& q_off, const std::vector<std::size_t>& q_len,
                    const std::vector<std::size_t>& k_off, const std::vector<std::size_t>& k_len,
                    bool causal, bool probe_encoder);
  ad::Var ffn(ad::Var x, const FfnWeights& w);

  ad::Tape* tape_;
  const ModelView* view_;
  bool train_weights_;
  std::vector<std::pair<const Tensor*, ad::Var>> bound_;
  ForwardProbe* probe_ = nullptr;
};

struct ForwardResult {
  float loss = 0.0F;
  Tensor logits;  // packed decoder rows of all examples, [sum T_b, V]
};

/// Teacher-forced loss and logits. prompt may be null (no prepending).
ForwardResult forward(const ModelWeights& weights, const PartialSpec& spec, const SoftPrompt* prompt,
                      const TokenBatch& batch, ForwardProbe* probe = nullptr);

struct PromptGrad {
  float loss = 0.0F;
  Tensor grad;  // [l, d]
};

/// Loss and dLoss/dP with the backbone frozen.
PromptGrad prompt_loss_and_grad(const ModelView& view, const SoftPrompt& prompt,
                                const TokenBatch& batch);

struct WeightsGrad {
  float loss = 0.0F;
  std::vector<Tensor> grads;  // aligned with ModelWeights::named()
};

/// Loss and gradients for every backbone tensor (no prompt).
WeightsGrad weights_loss_and_grad(const ModelWeights& weights, const TokenBatch& batch);

/// sigma(x W1 + b1) * mask, then W2 and b2; x is [rows, d], mask has d_ff
/// entries in {0, 1}.
Tensor ffn_apply(const FfnWeights& w, std::span<const std::uint8_t> mask, const Tensor& x);

/// Same formula with the masked columns of W1 / rows of W2 physically removed.
FfnWeights shrink_ffn(const FfnWeights& w, std::span<const std::uint8_t> mask);

/// Greedy decoding; stops at EOS (not included) or after max_out tokens.
/// Ties go to the lower token id.
std::vector<int> greedy_decode(const ModelView& view, const SoftPrompt* prompt,
                               const std::vector<int>& input, int max_out);

std::vector<std::vector<int>> greedy_decode_batch(const ModelView& view, const SoftPrompt* prompt,
                                                  const std::vector<std::vector<int>>& inputs,
                                                  int max_out);

}  // namespace fastpt
