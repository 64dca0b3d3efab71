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

#include "guided/layers.hpp"

#include <algorithm>
#include <cmath>

namespace guided {

template <typename T>
void init_normal(BasicMatrix<T>& m, Rng& rng, double stddev) {
  for (T& v : m.values()) v = static_cast<T>(rng.normal(0.0, stddev));
}

// ---------------------------------------------------------------------------
// Kernels

template <typename T>
BasicMatrix<T> layer_norm(const BasicMatrix<T>& x, std::span<const T> gamma,
                          std::span<const T> beta, T eps,
                          LayerNormCache<T>* cache) {
  const std::size_t n = x.cols();
  if (gamma.size() != n || beta.size() != n) {
    throw DimensionError("layer_norm: gamma/beta length " +
                         std::to_string(gamma.size()) + "/" +
                         std::to_string(beta.size()) + " does not match " +
                         x.shape_string());
  }
  BasicMatrix<T> out(x.rows(), n);
  if (cache) {
    cache->normalized = BasicMatrix<T>(x.rows(), n);
    cache->inv_std.assign(x.rows(), T(0));
  }
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    T mean = 0;
    for (T v : row) mean += v;
    mean /= static_cast<T>(n);
    T var = 0;
    for (T v : row) var += (v - mean) * (v - mean);
    var /= static_cast<T>(n);
    const T inv_std = T(1) / std::sqrt(var + eps);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < n; ++c) {
      const T xhat = (row[c] - mean) * inv_std;
      if (cache) cache->normalized(r, c) = xhat;
      dst[c] = gamma[c] * xhat + beta[c];
    }
    if (cache) cache->inv_std[r] = inv_std;
  }
  return out;
}

template <typename T>
BasicMatrix<T> layer_norm_backward(const BasicMatrix<T>& dy,
                                   const LayerNormCache<T>& cache,
                                   std::span<const T> gamma,
                                   std::span<T> dgamma, std::span<T> dbeta) {
  const std::size_t n = dy.cols();
  if (!dy.same_shape(cache.normalized) || gamma.size() != n ||
      dgamma.size() != n || dbeta.size() != n) {
    throw DimensionError("layer_norm_backward: shape mismatch " +
                         dy.shape_string() + " vs " +
                         cache.normalized.shape_string());
  }
  BasicMatrix<T> dx(dy.rows(), n);
  std::vector<T> dxhat(n);
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    const auto g = dy.row(r);
    const auto xhat = cache.normalized.row(r);
    T sum_dxhat = 0;
    T sum_dxhat_xhat = 0;
    for (std::size_t c = 0; c < n; ++c) {
      dgamma[c] += g[c] * xhat[c];
      dbeta[c] += g[c];
      dxhat[c] = g[c] * gamma[c];
      sum_dxhat += dxhat[c];
      sum_dxhat_xhat += dxhat[c] * xhat[c];
    }
    const T scale = cache.inv_std[r] / static_cast<T>(n);
    auto out = dx.row(r);
    for (std::size_t c = 0; c < n; ++c) {
      out[c] = scale * (static_cast<T>(n) * dxhat[c] - sum_dxhat -
                        xhat[c] * sum_dxhat_xhat);
    }
  }
  return dx;
}

template <typename T>
DropoutResult<T> dropout(const BasicMatrix<T>& x, double p, Rng& rng,
                         bool training) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ConfigError("dropout probability must lie in [0, 1), got " +
                      std::to_string(p));
  }
  DropoutResult<T> result;
  if (!training || p == 0.0) {
    result.output = x;
    return result;
  }
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  result.mask = BasicMatrix<T>(x.rows(), x.cols());
  result.output = BasicMatrix<T>(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T m = rng.uniform() < p ? T(0) : keep_scale;
    result.mask[i] = m;
    result.output[i] = x[i] * m;
  }
  return result;
}

template <typename T>
BasicMatrix<T> dropout_backward(const BasicMatrix<T>& dy,
                                const BasicMatrix<T>& mask) {
  if (mask.empty()) return dy;
  if (!dy.same_shape(mask)) {
    throw DimensionError("dropout_backward: " + dy.shape_string() + " vs " +
                         mask.shape_string());
  }
  BasicMatrix<T> dx(dy.rows(), dy.cols());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * mask[i];
  return dx;
}

template <typename T>
void softmax_rows_inplace(BasicMatrix<T>& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    if (row.empty()) continue;
    const T peak = *std::max_element(row.begin(), row.end());
    T sum = 0;
    for (T& v : row) {
      v = std::exp(v - peak);
      sum += v;
    }
    for (T& v : row) v /= sum;
  }
}

template <typename T>
BasicMatrix<T> relu(const BasicMatrix<T>& x) {
  BasicMatrix<T> out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  return out;
}

// ---------------------------------------------------------------------------
// Linear

template <typename T>
Linear<T>::Linear(std::size_t in, std::size_t out)
    : weight_(in, out), bias_(1, out) {}

template <typename T>
void Linear<T>::init(Rng& rng, double stddev) {
  init_normal(weight_.value, rng, stddev);
  bias_.value.set_zero();
}

template <typename T>
BasicMatrix<T> Linear<T>::forward(const BasicMatrix<T>& x) const {
  if (x.cols() != in_features()) {
    throw DimensionError("linear: input " + x.shape_string() +
                         " does not match weight " +
                         weight_.value.shape_string());
  }
  BasicMatrix<T> y = matmul(x, weight_.value);
  add_row_inplace(y, bias_.value);
  return y;
}

template <typename T>
BasicMatrix<T> Linear<T>::backward(const BasicMatrix<T>& x,
                                   const BasicMatrix<T>& dy,
                                   bool need_input_grad) {
  matmul_tn_accumulate(x, dy, weight_.grad);
  accumulate_column_sums(dy, bias_.grad);
  if (!need_input_grad) return {};
  return matmul_nt(dy, weight_.value);
}

template <typename T>
void Linear<T>::collect(const std::string& prefix, ParameterList<T>& out) {
  out.push_back({prefix + ".weight", &weight_});
  out.push_back({prefix + ".bias", &bias_});
}

// ---------------------------------------------------------------------------
// LayerNorm

template <typename T>
LayerNorm<T>::LayerNorm(std::size_t dim) : gamma_(1, dim), beta_(1, dim) {
  init();
}

template <typename T>
void LayerNorm<T>::init() {
  gamma_.value.fill(T(1));
  beta_.value.set_zero();
}

template <typename T>
BasicMatrix<T> LayerNorm<T>::forward(const BasicMatrix<T>& x,
                                     LayerNormCache<T>* cache) const {
  return layer_norm<T>(x, gamma_.value.values(), beta_.value.values(),
                       T(kLayerNormEps), cache);
}

template <typename T>
BasicMatrix<T> LayerNorm<T>::backward(const BasicMatrix<T>& dy,
                                      const LayerNormCache<T>& cache) {
  return layer_norm_backward<T>(dy, cache, gamma_.value.values(),
                                gamma_.grad.values(), beta_.grad.values());
}

template <typename T>
void LayerNorm<T>::collect(const std::string& prefix, ParameterList<T>& out) {
  out.push_back({prefix + ".gamma", &gamma_});
  out.push_back({prefix + ".beta", &beta_});
}

// ---------------------------------------------------------------------------
// MultiHeadAttention

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(std::size_t dim, std::size_t heads)
    : dim_(dim),
      heads_(heads),
      q_(dim, dim),
      k_(dim, dim),
      v_(dim, dim),
      o_(dim, dim) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("attention: model dim " + std::to_string(dim) +
                      " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
}

template <typename T>
void MultiHeadAttention<T>::init(Rng& rng, double stddev) {
  q_.init(rng, stddev);
  k_.init(rng, stddev);
  v_.init(rng, stddev);
  o_.init(rng, stddev);
}

template <typename T>
BasicMatrix<T> MultiHeadAttention<T>::forward(const BasicMatrix<T>& x,
                                              AttentionCache<T>* cache) const {
  if (x.cols() != dim_) {
    throw DimensionError("attention: input " + x.shape_string() +
                         " does not match model dim " + std::to_string(dim_));
  }
  const std::size_t head_dim = dim_ / heads_;
  const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));

  BasicMatrix<T> q = q_.forward(x);
  BasicMatrix<T> k = k_.forward(x);
  BasicMatrix<T> v = v_.forward(x);
  BasicMatrix<T> context(x.rows(), dim_);
  if (cache) cache->probs.clear();

  for (std::size_t h = 0; h < heads_; ++h) {
    const std::size_t offset = h * head_dim;
    const BasicMatrix<T> qh = slice_cols(q, offset, head_dim);
    const BasicMatrix<T> kh = slice_cols(k, offset, head_dim);
    const BasicMatrix<T> vh = slice_cols(v, offset, head_dim);
    BasicMatrix<T> scores = matmul_nt(qh, kh);
    scale_inplace(scores, scale);
    softmax_rows_inplace(scores);
    assign_cols(context, offset, matmul(scores, vh));
    if (cache) cache->probs.push_back(std::move(scores));
  }

  BasicMatrix<T> out = o_.forward(context);
  if (cache) {
    cache->input = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->context = std::move(context);
  }
  return out;
}

template <typename T>
BasicMatrix<T> MultiHeadAttention<T>::backward(
    const BasicMatrix<T>& dy, const AttentionCache<T>& cache) {
  const std::size_t head_dim = dim_ / heads_;
  const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));
  const std::size_t seq = cache.input.rows();

  const BasicMatrix<T> dcontext = o_.backward(cache.context, dy);
  BasicMatrix<T> dq(seq, dim_), dk(seq, dim_), dv(seq, dim_);

  for (std::size_t h = 0; h < heads_; ++h) {
    const std::size_t offset = h * head_dim;
    const BasicMatrix<T>& probs = cache.probs[h];
    const BasicMatrix<T> qh = slice_cols(cache.q, offset, head_dim);
    const BasicMatrix<T> kh = slice_cols(cache.k, offset, head_dim);
    const BasicMatrix<T> vh = slice_cols(cache.v, offset, head_dim);
    const BasicMatrix<T> dch = slice_cols(dcontext, offset, head_dim);

    BasicMatrix<T> dprobs = matmul_nt(dch, vh);
    assign_cols(dv, offset, matmul_tn(probs, dch));

    // Softmax Jacobian, row-wise: ds = p * (dp - <dp, p>).
    BasicMatrix<T> dscores(seq, seq);
    for (std::size_t r = 0; r < seq; ++r) {
      const auto p = probs.row(r);
      const auto g = dprobs.row(r);
      T dot = 0;
      for (std::size_t c = 0; c < seq; ++c) dot += g[c] * p[c];
      auto out = dscores.row(r);
      for (std::size_t c = 0; c < seq; ++c) out[c] = p[c] * (g[c] - dot) * scale;
    }
    assign_cols(dq, offset, matmul(dscores, kh));
    assign_cols(dk, offset, matmul_tn(dscores, qh));
  }

  BasicMatrix<T> dx = q_.backward(cache.input, dq);
  add_inplace(dx, k_.backward(cache.input, dk));
  add_inplace(dx, v_.backward(cache.input, dv));
  return dx;
}

template <typename T>
void MultiHeadAttention<T>::collect(const std::string& prefix,
                                    ParameterList<T>& out) {
  q_.collect(prefix + ".q", out);
  k_.collect(prefix + ".k", out);
  v_.collect(prefix + ".v", out);
  o_.collect(prefix + ".o", out);
}

// ---------------------------------------------------------------------------
// FeedForward

template <typename T>
FeedForward<T>::FeedForward(std::size_t dim, std::size_t hidden)
    : fc1_(dim, hidden), fc2_(hidden, dim) {}

template <typename T>
void FeedForward<T>::init(Rng& rng, double stddev) {
  fc1_.init(rng, stddev);
  fc2_.init(rng, stddev);
}

template <typename T>
BasicMatrix<T> FeedForward<T>::forward(const BasicMatrix<T>& x,
                                       FeedForwardCache<T>* cache) const {
  BasicMatrix<T> pre = fc1_.forward(x);
  BasicMatrix<T> hidden = relu(pre);
  BasicMatrix<T> out = fc2_.forward(hidden);
  if (cache) {
    cache->input = x;
    cache->pre_activation = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return out;
}

template <typename T>
BasicMatrix<T> FeedForward<T>::backward(const BasicMatrix<T>& dy,
                                        const FeedForwardCache<T>& cache) {
  BasicMatrix<T> dhidden = fc2_.backward(cache.hidden, dy);
  for (std::size_t i = 0; i < dhidden.size(); ++i) {
    if (cache.pre_activation[i] <= T(0)) dhidden[i] = T(0);
  }
  return fc1_.backward(cache.input, dhidden);
}

template <typename T>
void FeedForward<T>::collect(const std::string& prefix,
                             ParameterList<T>& out) {
  fc1_.collect(prefix + ".fc1", out);
  fc2_.collect(prefix + ".fc2", out);
}

// ---------------------------------------------------------------------------
// EncoderLayer

template <typename T>
EncoderLayer<T>::EncoderLayer(std::size_t dim, std::size_t heads,
                              std::size_t ffn_dim, double dropout)
    : dropout_(dropout),
      attention_(dim, heads),
      norm1_(dim),
      ffn_(dim, ffn_dim),
      norm2_(dim) {}

template <typename T>
void EncoderLayer<T>::init(Rng& rng, double stddev) {
  attention_.init(rng, stddev);
  norm1_.init();
  ffn_.init(rng, stddev);
  norm2_.init();
}

template <typename T>
BasicMatrix<T> EncoderLayer<T>::forward(const BasicMatrix<T>& x, bool training,
                                        Rng& rng,
                                        EncoderLayerCache<T>* cache) const {
  auto attn = dropout(attention_.forward(x, cache ? &cache->attention : nullptr),
                      dropout_, rng, training);
  add_inplace(attn.output, x);
  BasicMatrix<T> h = norm1_.forward(attn.output, cache ? &cache->norm1 : nullptr);

  auto ff = dropout(ffn_.forward(h, cache ? &cache->ffn : nullptr), dropout_,
                    rng, training);
  add_inplace(ff.output, h);
  BasicMatrix<T> y = norm2_.forward(ff.output, cache ? &cache->norm2 : nullptr);
  if (cache) {
    cache->attention_mask = std::move(attn.mask);
    cache->ffn_mask = std::move(ff.mask);
  }
  return y;
}

template <typename T>
BasicMatrix<T> EncoderLayer<T>::backward(const BasicMatrix<T>& dy,
                                         const EncoderLayerCache<T>& cache) {
  BasicMatrix<T> dr2 = norm2_.backward(dy, cache.norm2);
  BasicMatrix<T> dh =
      ffn_.backward(dropout_backward(dr2, cache.ffn_mask), cache.ffn);
  add_inplace(dh, dr2);
  BasicMatrix<T> dr1 = norm1_.backward(dh, cache.norm1);
  BasicMatrix<T> dx = attention_.backward(
      dropout_backward(dr1, cache.attention_mask), cache.attention);
  add_inplace(dx, dr1);
  return dx;
}

template <typename T>
void EncoderLayer<T>::collect(const std::string& prefix,
                              ParameterList<T>& out) {
  attention_.collect(prefix + ".attn", out);
  norm1_.collect(prefix + ".norm1", out);
  ffn_.collect(prefix + ".ffn", out);
  norm2_.collect(prefix + ".norm2", out);
}

#define GUIDED_INSTANTIATE(T)                                                 \
  template void init_normal(BasicMatrix<T>&, Rng&, double);                   \
  template BasicMatrix<T> layer_norm(const BasicMatrix<T>&,                   \
                                     std::span<const T>, std::span<const T>,  \
                                     T, LayerNormCache<T>*);                  \
  template BasicMatrix<T> layer_norm_backward(                                \
      const BasicMatrix<T>&, const LayerNormCache<T>&, std::span<const T>,    \
      std::span<T>, std::span<T>);                                            \
  template DropoutResult<T> dropout(const BasicMatrix<T>&, double, Rng&,      \
                                    bool);                                    \
  template BasicMatrix<T> dropout_backward(const BasicMatrix<T>&,             \
                                           const BasicMatrix<T>&);            \
  template void softmax_rows_inplace(BasicMatrix<T>&);                        \
  template BasicMatrix<T> relu(const BasicMatrix<T>&);                        \
  template class Linear<T>;                                                   \
  template class LayerNorm<T>;                                                \
  template class MultiHeadAttention<T>;                                       \
  template class FeedForward<T>;                                              \
  template class EncoderLayer<T>;

GUIDED_INSTANTIATE(float)
GUIDED_INSTANTIATE(double)

#undef GUIDED_INSTANTIATE

}  // namespace guided
