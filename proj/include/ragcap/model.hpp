#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ragcap/prompt.hpp"
#include "ragcap/tokenizer.hpp"
#include "ragcap/vector_index.hpp"

namespace ragcap {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Architecture knobs. d is the per-head width of the cross-attention
// projections and the only knob that changes the trainable parameter count.
struct ModelConfig {
  int n_layers = 2;
  int n_heads = 2;
  int d_model = 64;    // decoder width
  int d_encoder = 64;  // encoder state width
  int d = 16;          // cross-attention projection dim (= d_k = d_v)
  int vocab_size = 0;
  int max_context = 128;
  int n_patches = 4;
  int image_dim = 16;  // input width of the encoder stub
  int d_ff = 0;        // 0 -> 4 * d_model

  int ffn_dim() const { return d_ff > 0 ? d_ff : 4 * d_model; }
  void validate() const;
};

struct LayerNormParams {
  Vector gain;
  Vector bias;
};

// Frozen per-layer decoder weights: causal self-attention, layer norms and
// the feed-forward block. The self-attention value/output projections are
// initialized as identity-plus-noise so the frozen backbone reuses prompt
// tokens the way a pretrained decoder does; with the output head tied to
// the token embedding this is what lets retrieved captions steer
// generation.
struct FrozenLayer {
  Matrix attn_qkv;   // d_model x 3*d_model
  Matrix attn_proj;  // d_model x d_model
  LayerNormParams ln1, ln2, ln3;
  Matrix ffn_in;   // d_model x d_ff
  Matrix ffn_out;  // d_ff x d_model
};

// Trainable cross-attention for one decoder layer, one matrix per head as
// in the multi-head attention formulation: W_Q maps decoder states, W_K and
// W_V map encoder states, all to width d; W_O projects the concatenated
// heads back to the decoder width. No bias terms.
struct CrossAttentionWeights {
  std::vector<Matrix> w_q;  // h of d_model x d
  std::vector<Matrix> w_k;  // h of d_encoder x d
  std::vector<Matrix> w_v;  // h of d_encoder x d
  Matrix w_o;               // (h*d) x d_model
};

struct ModelParams {
  ModelConfig config;
  std::uint64_t init_seed = 0;

  // Frozen.
  Matrix token_embedding;  // vocab x d_model; output head is tied to this
  Matrix pos_embedding;    // max_context x d_model
  std::vector<Matrix> patch_proj;  // n_patches of image_dim x d_encoder
  std::vector<FrozenLayer> layers;
  LayerNormParams ln_final;

  // Trainable.
  std::vector<CrossAttentionWeights> theta;  // one per layer
};

// Seeded random initialization. The frozen stream depends only on the seed
// and the frozen shapes, so variants that differ in d share an identical
// backbone.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// Image features V: one row per patch position, each a frozen linear
// projection of the image embedding. Zero the rows for the blank-image
// ablation.
struct EncoderStates {
  Matrix states;  // n_patches x d_encoder
};

EncoderStates encode_image(const EmbeddingVector& image_embedding,
                           const ModelParams& params);

// One cross-attention sublayer application (pre-norm input expected;
// residual added by the caller). Exposed for direct testing against the
// multi-head attention equations.
struct CrossAttentionCache {
  std::vector<Matrix> q, k, v;  // per head
  std::vector<Matrix> attn;     // per head: N x n_patches
  Matrix heads_concat;          // N x (h*d)
};

Matrix cross_attention(const Matrix& decoder_states, const EncoderStates& enc,
                       const CrossAttentionWeights& weights,
                       CrossAttentionCache* cache = nullptr);

// Activations recorded by the forward pass; consumed by backward().
struct LayerCache {
  Matrix x_in;            // residual stream entering the layer
  Matrix ln1_norm;        // normalized input of self-attention
  Vector ln1_rstd;
  std::vector<Matrix> sa_q, sa_k, sa_v;  // per head
  std::vector<Matrix> sa_attn;           // per head, causal rows
  Matrix sa_concat;
  Matrix x_after_attn;
  Matrix ln2_norm;
  Vector ln2_rstd;
  CrossAttentionCache cross;
  Matrix x_after_cross;
  Matrix ln3_norm;
  Vector ln3_rstd;
  Matrix ffn_pre;  // pre-activation
  Matrix ffn_act;
};

struct ForwardCache {
  Matrix x0;
  std::vector<LayerCache> layers;
  Matrix lnf_norm;
  Vector lnf_rstd;
};

// Per-position logits over the vocabulary. enc == nullptr skips the
// cross-attention sublayers entirely (pure frozen-decoder forward).
Matrix decoder_forward(const std::vector<int>& tokens,
                       const EncoderStates* enc, const ModelParams& params,
                       ForwardCache* cache = nullptr);

// Sum of negative log-likelihoods (natural log) over the positions where
// loss_mask is true; logits at position t-1 score the token at position t.
double caption_loss(const Matrix& logits, const PromptInstance& instance);

// Closed-form trainable parameter count: L * h * d * (2*d_encoder +
// 2*d_model).
std::int64_t count_trainable_params(const ModelConfig& config);

// The same count by walking the actual tensors.
std::int64_t theta_param_count(const ModelParams& params);

// Gradients mirroring the theta shapes.
struct ThetaGradients {
  std::vector<CrossAttentionWeights> layers;
};

ThetaGradients zero_gradients(const ModelConfig& config);
void accumulate(ThetaGradients& acc, const ThetaGradients& delta);
void scale_gradients(ThetaGradients& grads, double factor);

// Backward pass for the masked cross-entropy objective. Returns gradients
// for the cross-attention weights only; frozen tensors receive none.
// Requires the cache and logits from decoder_forward on the same inputs.
ThetaGradients backward(const PromptInstance& instance,
                        const EncoderStates& enc, const ModelParams& params,
                        const ForwardCache& cache, const Matrix& logits);

// Forward + loss + backward in one call.
double loss_and_gradients(const PromptInstance& instance,
                          const EncoderStates& enc, const ModelParams& params,
                          ThetaGradients* grads);

// Beam search over summed log-probabilities. Hypotheses finish on <eos> or
// after max_new tokens; returns the generated continuation of the best
// finished hypothesis (terminating <eos> included when emitted), ties broken
// by the lexicographically smallest token sequence.
std::vector<int> beam_search(const EncoderStates& enc,
                             const std::vector<int>& prompt_tokens,
                             const ModelParams& params, int beam = 3,
                             int max_new = 24);

// SHA-256 over every frozen tensor, in a fixed order.
std::string frozen_hash(const ModelParams& params);

// Checkpoint: config, seed, tokenizer vocabulary and all tensors in named
// sections; round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const Tokenizer& tokenizer);
struct Checkpoint {
  ModelParams params;
  Tokenizer tokenizer;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ragcap
