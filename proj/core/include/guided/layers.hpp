// Copyright 2026 The Guided Grounding Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GUIDED_LAYERS_HPP_
#define GUIDED_LAYERS_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "guided/rng.hpp"
#include "guided/tensor.hpp"

namespace guided {

// A learnable tensor and its gradient accumulator.
template <typename T>
struct Parameter {
  BasicMatrix<T> value;
  BasicMatrix<T> grad;

  Parameter() = default;
  Parameter(std::size_t rows, std::size_t cols)
      : value(rows, cols), grad(rows, cols) {}

  void zero_grad() { grad.set_zero(); }
};

template <typename T>
struct NamedParameter {
  std::string name;
  Parameter<T>* param;
};

template <typename T>
using ParameterList = std::vector<NamedParameter<T>>;

// Fills with N(0, stddev) draws in row-major order.
template <typename T>
void init_normal(BasicMatrix<T>& m, Rng& rng, double stddev);

// ---------------------------------------------------------------------------
// Functional kernels.

template <typename T>
struct LayerNormCache {
  BasicMatrix<T> normalized;  // (x - mean) * inv_std, before the affine map
  std::vector<T> inv_std;     // per row
};

inline constexpr double kLayerNormEps = 1e-5;

// Row-wise layer normalization followed by y = gamma * x_hat + beta.
template <typename T>
BasicMatrix<T> layer_norm(const BasicMatrix<T>& x, std::span<const T> gamma,
                          std::span<const T> beta, T eps = T(kLayerNormEps),
                          LayerNormCache<T>* cache = nullptr);

// Returns dL/dx and accumulates into dgamma / dbeta.
template <typename T>
BasicMatrix<T> layer_norm_backward(const BasicMatrix<T>& dy,
                                   const LayerNormCache<T>& cache,
                                   std::span<const T> gamma,
                                   std::span<T> dgamma, std::span<T> dbeta);

template <typename T>
struct DropoutResult {
  BasicMatrix<T> output;
  // Per-element multiplier (0 or 1/(1-p)); empty when dropout was the
  // identity.
  BasicMatrix<T> mask;
};

template <typename T>
DropoutResult<T> dropout(const BasicMatrix<T>& x, double p, Rng& rng,
                         bool training);

template <typename T>
BasicMatrix<T> dropout_backward(const BasicMatrix<T>& dy,
                                const BasicMatrix<T>& mask);

// Row-wise softmax with max subtraction.
template <typename T>
void softmax_rows_inplace(BasicMatrix<T>& m);

template <typename T>
BasicMatrix<T> relu(const BasicMatrix<T>& x);

// ---------------------------------------------------------------------------
// Layers. Each forward optionally records what its backward needs; backward
// accumulates parameter gradients and returns the input gradient.

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out);

  std::size_t in_features() const { return weight_.value.rows(); }
  std::size_t out_features() const { return weight_.value.cols(); }

  void init(Rng& rng, double stddev);
  BasicMatrix<T> forward(const BasicMatrix<T>& x) const;
  // `need_input_grad` false skips the dx product for leaf inputs.
  BasicMatrix<T> backward(const BasicMatrix<T>& x, const BasicMatrix<T>& dy,
                          bool need_input_grad = true);
  void collect(const std::string& prefix, ParameterList<T>& out);

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }
  const Parameter<T>& weight() const { return weight_; }
  const Parameter<T>& bias() const { return bias_; }

 private:
  Parameter<T> weight_;  // in × out
  Parameter<T> bias_;    // 1 × out
};

template <typename T>
class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(std::size_t dim);

  void init();
  BasicMatrix<T> forward(const BasicMatrix<T>& x,
                         LayerNormCache<T>* cache) const;
  BasicMatrix<T> backward(const BasicMatrix<T>& dy,
                          const LayerNormCache<T>& cache);
  void collect(const std::string& prefix, ParameterList<T>& out);

  Parameter<T>& gamma() { return gamma_; }
  Parameter<T>& beta() { return beta_; }

 private:
  Parameter<T> gamma_;  // 1 × dim
  Parameter<T> beta_;   // 1 × dim
};

template <typename T>
struct AttentionCache {
  BasicMatrix<T> input;
  BasicMatrix<T> q, k, v;              // seq × d
  std::vector<BasicMatrix<T>> probs;   // per head, seq × seq
  BasicMatrix<T> context;              // concatenated head outputs
};

// Scaled dot-product self-attention over all positions (no masking).
template <typename T>
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  // Throws ConfigError when dim is not divisible by heads.
  MultiHeadAttention(std::size_t dim, std::size_t heads);

  std::size_t dim() const { return dim_; }
  std::size_t heads() const { return heads_; }

  void init(Rng& rng, double stddev);
  BasicMatrix<T> forward(const BasicMatrix<T>& x,
                         AttentionCache<T>* cache) const;
  BasicMatrix<T> backward(const BasicMatrix<T>& dy,
                          const AttentionCache<T>& cache);
  void collect(const std::string& prefix, ParameterList<T>& out);

  Linear<T>& query() { return q_; }
  Linear<T>& key() { return k_; }
  Linear<T>& value() { return v_; }
  Linear<T>& output() { return o_; }

 private:
  std::size_t dim_ = 0;
  std::size_t heads_ = 1;
  Linear<T> q_, k_, v_, o_;
};

template <typename T>
struct FeedForwardCache {
  BasicMatrix<T> input;
  BasicMatrix<T> pre_activation;
  BasicMatrix<T> hidden;
};

// w2 · relu(w1 · x + b1) + b2, row-wise.
template <typename T>
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(std::size_t dim, std::size_t hidden);

  void init(Rng& rng, double stddev);
  BasicMatrix<T> forward(const BasicMatrix<T>& x,
                         FeedForwardCache<T>* cache) const;
  BasicMatrix<T> backward(const BasicMatrix<T>& dy,
                          const FeedForwardCache<T>& cache);
  void collect(const std::string& prefix, ParameterList<T>& out);

  Linear<T>& fc1() { return fc1_; }
  Linear<T>& fc2() { return fc2_; }

 private:
  Linear<T> fc1_, fc2_;
};

template <typename T>
struct EncoderLayerCache {
  AttentionCache<T> attention;
  BasicMatrix<T> attention_mask;
  LayerNormCache<T> norm1;
  FeedForwardCache<T> ffn;
  BasicMatrix<T> ffn_mask;
  LayerNormCache<T> norm2;
};

// Post-norm transformer encoder layer:
//   h = norm1(x + dropout(attn(x)));  y = norm2(h + dropout(ffn(h))).
template <typename T>
class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(std::size_t dim, std::size_t heads, std::size_t ffn_dim,
               double dropout);

  void init(Rng& rng, double stddev);
  BasicMatrix<T> forward(const BasicMatrix<T>& x, bool training, Rng& rng,
                         EncoderLayerCache<T>* cache) const;
  BasicMatrix<T> backward(const BasicMatrix<T>& dy,
                          const EncoderLayerCache<T>& cache);
  void collect(const std::string& prefix, ParameterList<T>& out);

  MultiHeadAttention<T>& attention() { return attention_; }
  FeedForward<T>& ffn() { return ffn_; }

 private:
  double dropout_ = 0.0;
  MultiHeadAttention<T> attention_;
  LayerNorm<T> norm1_;
  FeedForward<T> ffn_;
  LayerNorm<T> norm2_;
};

}  // namespace guided

#endif  // GUIDED_LAYERS_HPP_
