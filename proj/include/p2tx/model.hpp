// Copyright 2026 The p2tx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Transformer encoder-decoder from continuous pose features to subword tokens,
// with hand-written reverse-mode gradients.
//
// Encoder: linear projection D -> d_model, sinusoidal positions, L pre-norm
// layers (self-attention, ReLU FFN), final layer norm.
// Decoder: token embedding * sqrt(d_model), sinusoidal positions, L pre-norm
// layers (causal self-attention, cross-attention, ReLU FFN), final layer
// norm, then logits against the (tied) token embedding.
//
// Everything is templated on the scalar type. Production code uses float;
// the gradient checker instantiates double.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "p2tx/pose.hpp"
#include "p2tx/rng.hpp"
#include "p2tx/tokenizer.hpp"

namespace p2tx {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
  std::uint32_t layers = 3;
  std::uint32_t heads = 4;
  std::uint32_t ffn_dim = 1024;
  std::uint32_t embed_dim = 256;
  std::uint32_t input_dim = 1;
  std::uint32_t vocab_size = kNumSpecials;
  std::uint32_t max_positions = 4096;
  double dropout = 0.0;

  // Every violated invariant, in field order; empty when valid.
  std::vector<std::string> problems() const;
  // Throws kInvalidArgument listing problems().
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// L=3, H=4, d_ff=1024, d_model=256.
ModelConfig small_config(std::uint32_t input_dim, std::uint32_t vocab_size);
// L=6, H=8, d_ff=2048, d_model=512.
ModelConfig baseline_config(std::uint32_t input_dim, std::uint32_t vocab_size);

// Closed-form scalar count of every tensor in Parameters.
std::uint64_t param_count(const ModelConfig& config);

// Biases and layer-norm vectors are stored as 1 x n matrices.
template <class T>
struct LayerNormWeights {
  Matrix<T> gain, bias;
};

template <class T>
struct AttentionWeights {
  Matrix<T> wq, bq, wk, bk, wv, bv, wo, bo;
};

template <class T>
struct FeedForwardWeights {
  Matrix<T> w1, b1, w2, b2;
};

template <class T>
struct EncoderLayerWeights {
  LayerNormWeights<T> attn_norm;
  AttentionWeights<T> self_attn;
  LayerNormWeights<T> ffn_norm;
  FeedForwardWeights<T> ffn;
};

template <class T>
struct DecoderLayerWeights {
  LayerNormWeights<T> self_norm;
  AttentionWeights<T> self_attn;
  LayerNormWeights<T> cross_norm;
  AttentionWeights<T> cross_attn;
  LayerNormWeights<T> ffn_norm;
  FeedForwardWeights<T> ffn;
};

template <class T>
class Parameters {
 public:
  // Zero weights, unit layer-norm gains, shaped from the config.
  explicit Parameters(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  // Canonical (name, tensor) list; the order is fixed and shared by
  // checkpoints, initialization and optimizers.
  std::vector<std::pair<std::string, Matrix<T>*>> tensors();
  std::vector<std::pair<std::string, const Matrix<T>*>> tensors() const;

  std::uint64_t scalar_count() const;
  void set_zero();

  template <class U>
  Parameters<U> cast() const {
    Parameters<U> out(config_);
    auto dst = out.tensors();
    auto src = tensors();
    for (std::size_t i = 0; i < src.size(); ++i)
      *dst[i].second = src[i].second->template cast<U>();
    return out;
  }

  Matrix<T> input_proj, input_bias;
  Matrix<T> embedding;  // V x d_model, shared with the output projection
  std::vector<EncoderLayerWeights<T>> encoder;
  LayerNormWeights<T> encoder_norm;
  std::vector<DecoderLayerWeights<T>> decoder;
  LayerNormWeights<T> decoder_norm;

 private:
  ModelConfig config_;
};

// Uniform +-sqrt(6 / (fan_in + fan_out)) weights in canonical tensor order,
// zero biases, unit gains.
template <class T>
Parameters<T> init_parameters(const ModelConfig& config, std::uint64_t seed);

// ---- activation caches ----------------------------------------------------

template <class T>
struct LayerNormCache {
  Matrix<T> normalized;         // (x - mean) / std
  std::vector<double> inv_std;  // per row
};

template <class T>
struct AttentionCache {
  Matrix<T> query_input, kv_input;
  Matrix<T> q, k, v;               // projected, all heads side by side
  std::vector<Matrix<T>> probs;    // per head, Tq x Tk
  Matrix<T> context;               // heads concatenated, Tq x d_model
};

template <class T>
struct FeedForwardCache {
  Matrix<T> input;
  Matrix<T> activated;  // ReLU output
};

template <class T>
struct EncoderLayerCache {
  LayerNormCache<T> attn_norm;
  AttentionCache<T> self_attn;
  Matrix<T> attn_dropout;
  LayerNormCache<T> ffn_norm;
  FeedForwardCache<T> ffn;
  Matrix<T> ffn_dropout;
};

template <class T>
struct DecoderLayerCache {
  LayerNormCache<T> self_norm;
  AttentionCache<T> self_attn;
  Matrix<T> self_dropout;
  LayerNormCache<T> cross_norm;
  AttentionCache<T> cross_attn;
  Matrix<T> cross_dropout;
  LayerNormCache<T> ffn_norm;
  FeedForwardCache<T> ffn;
  Matrix<T> ffn_dropout;
};

// Everything backward() needs. Dropout masks are empty when dropout was
// inactive.
template <class T>
struct ForwardCache {
  ModelConfig config;
  Matrix<T> source;                  // T_src x D
  std::vector<std::uint8_t> source_mask;
  Matrix<T> source_dropout;
  std::vector<EncoderLayerCache<T>> encoder;
  LayerNormCache<T> encoder_norm;
  Matrix<T> memory;                  // encoder output
  std::vector<std::uint32_t> target;
  Matrix<T> target_dropout;
  std::vector<DecoderLayerCache<T>> decoder;
  LayerNormCache<T> decoder_norm;
  Matrix<T> decoder_output;          // final normalized decoder states
};

template <class T>
struct ForwardResult {
  Matrix<T> logits;  // |target| x V
  ForwardCache<T> cache;
};

// Teacher-forced forward pass. `rng` is required when train_mode is set and
// dropout > 0. Throws kDimensionMismatch when the feature width differs from
// input_dim, kOutOfRange for token ids >= V or sequences longer than
// max_positions.
template <class T>
ForwardResult<T> forward(const Parameters<T>& params, const FeatureSequence& source,
                         const TokenSequence& target_in, bool train_mode,
                         Rng* rng = nullptr);

// Adds the gradient of a scalar loss, given d(loss)/d(logits), into `grads`.
// Throws kConfigMismatch when the cache came from a different config.
template <class T>
void backward_accumulate(const Parameters<T>& params, const ForwardCache<T>& cache,
                         const Matrix<T>& dlogits, Parameters<T>& grads);

template <class T>
Parameters<T> backward(const Parameters<T>& params, const ForwardCache<T>& cache,
                       const Matrix<T>& dlogits);

// Inference entry points (no caches, dropout off).
template <class T>
Matrix<T> encode_source(const Parameters<T>& params, const FeatureSequence& source);

template <class T>
Matrix<T> decode_logits(const Parameters<T>& params, const Matrix<T>& memory,
                        const std::vector<std::uint8_t>& source_mask,
                        const std::vector<std::uint32_t>& target_in);

// Incremental decoding. Cross-attention keys/values are projected once and
// self-attention keys/values grow by one row per step, so a step costs one
// position instead of the whole prefix.
template <class T>
struct DecoderState {
  std::vector<std::uint8_t> source_mask;
  std::vector<Matrix<T>> cross_k, cross_v;  // per layer
  std::vector<Matrix<T>> self_k, self_v;    // per layer, one row per step
  std::uint32_t length = 0;
};

template <class T>
DecoderState<T> start_decoding(const Parameters<T>& params, const Matrix<T>& memory,
                               const std::vector<std::uint8_t>& source_mask);

// Feeds `token` at position state.length and returns the 1 x V logits for
// the following position. Matches the last row of decode_logits() up to
// floating-point reassociation.
template <class T>
Matrix<T> decode_step(const Parameters<T>& params, DecoderState<T>& state,
                      std::uint32_t token);

// Standard sinusoidal table: even columns sin, odd columns cos.
template <class T>
Matrix<T> sinusoidal_positions(std::uint32_t length, std::uint32_t dim);

extern template class Parameters<float>;
extern template class Parameters<double>;

}  // namespace p2tx
