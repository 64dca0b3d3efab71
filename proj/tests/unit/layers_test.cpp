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
#include <functional>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "guided/errors.hpp"

namespace guided {
namespace {

using testing::random_matrix;
using testing::relative_error;

constexpr double kStep = 1e-5;
constexpr double kTolerance = 1e-4;

struct LayerCheck {
  double max_rel_error = 0.0;
  std::string worst;
  // Largest |analytic| and |numeric| over parameters whose gradient is
  // identically zero.
  double max_zero_analytic = 0.0;
  double max_zero_numeric = 0.0;
};

// Checks dL/dθ and dL/dx for L = sum(forward(x) .* r) against central
// differences. `backward(x, dy)` must return dx and accumulate into the
// parameters' gradients. Parameters named in `zero_gradient` must have an
// identically zero gradient; their finite differences are pure round-off,
// so they are bounded absolutely instead of relatively.
LayerCheck check_layer(
    ParameterList<double> params, MatrixD x,
    const std::function<MatrixD(const MatrixD&)>& forward,
    const std::function<MatrixD(const MatrixD&, const MatrixD&)>& backward,
    Rng& rng, const std::vector<std::string>& zero_gradient = {}) {
  const MatrixD y = forward(x);
  const MatrixD r = random_matrix(y.rows(), y.cols(), rng);
  const auto loss = [&](const MatrixD& input) {
    const MatrixD out = forward(input);
    double total = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) total += out[i] * r[i];
    return total;
  };
  for (auto& p : params) p.param->zero_grad();
  const MatrixD dx = backward(x, r);

  LayerCheck result;
  const auto record = [&](double analytic, double numeric,
                          const std::string& where) {
    const double err = relative_error(analytic, numeric);
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst = where;
    }
  };
  for (auto& p : params) {
    const bool zero = std::find(zero_gradient.begin(), zero_gradient.end(),
                                p.name) != zero_gradient.end();
    auto& v = p.param->value;
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double saved = v[j];
      v[j] = saved + kStep;
      const double up = loss(x);
      v[j] = saved - kStep;
      const double down = loss(x);
      v[j] = saved;
      const double numeric = (up - down) / (2 * kStep);
      if (zero) {
        result.max_zero_analytic =
            std::max(result.max_zero_analytic, std::abs(p.param->grad[j]));
        result.max_zero_numeric =
            std::max(result.max_zero_numeric, std::abs(numeric));
        continue;
      }
      record(p.param->grad[j], numeric, p.name + "[" + std::to_string(j) + "]");
    }
  }
  for (std::size_t j = 0; j < x.size(); ++j) {
    MatrixD xp = x;
    xp[j] += kStep;
    MatrixD xm = x;
    xm[j] -= kStep;
    record(dx[j], (loss(xp) - loss(xm)) / (2 * kStep),
           "input[" + std::to_string(j) + "]");
  }
  return result;
}

void perturb(ParameterList<double>& params, Rng& rng, double sd) {
  for (auto& p : params) {
    for (double& v : p.param->value.values()) v += rng.normal(0.0, sd);
  }
}

TEST(LayerNormTest, ConstantRowMapsToZero) {
  const MatrixD x{{3, 3, 3, 3}};
  const std::vector<double> gamma(4, 1.0), beta(4, 0.0);
  const MatrixD y = layer_norm<double>(x, gamma, beta);
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNormTest, StandardizedRowIsNearlyUnchanged) {
  const MatrixD x{{1, -1}};
  const std::vector<double> gamma(2, 1.0), beta(2, 0.0);
  const MatrixD y = layer_norm<double>(x, gamma, beta);
  EXPECT_NEAR(y(0, 0), 1.0, 1e-5);
  EXPECT_NEAR(y(0, 1), -1.0, 1e-5);
}

TEST(LayerNormTest, RowsHaveZeroMeanAndUnitVariance) {
  Rng rng(4);
  const Matrix x = cast<float>(random_matrix(16, 32, rng, 3.0));
  const std::vector<float> gamma(32, 1.0f), beta(32, 0.0f);
  const Matrix y = layer_norm<float>(x, gamma, beta);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double mean = 0.0, var = 0.0;
    for (float v : y.row(r)) mean += v;
    mean /= 32.0;
    for (float v : y.row(r)) var += (v - mean) * (v - mean);
    var /= 32.0;
    EXPECT_LE(std::abs(mean), 1e-5);
    EXPECT_LE(std::abs(var - 1.0), 1e-3);
  }
}

TEST(LayerNormTest, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  LayerNorm<double> norm(8);
  norm.init();
  ParameterList<double> params;
  norm.collect("norm", params);
  perturb(params, rng, 0.5);
  const auto forward = [&](const MatrixD& x) {
    return norm.forward(x, nullptr);
  };
  const auto backward = [&](const MatrixD& x, const MatrixD& dy) {
    LayerNormCache<double> cache;
    norm.forward(x, &cache);
    return norm.backward(dy, cache);
  };
  const LayerCheck c = check_layer(params, random_matrix(4, 8, rng), forward,
                                   backward, rng);
  EXPECT_LE(c.max_rel_error, kTolerance) << c.worst;
}

TEST(SoftmaxTest, RowsSumToOne) {
  Rng rng(6);
  Matrix m = cast<float>(random_matrix(10, 17, rng, 5.0));
  m(0, 0) = 80.0f;  // large logits must not overflow
  softmax_rows_inplace(m);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (float v : m.row(r)) {
      EXPECT_GE(v, 0.0f);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-5);
  }
}

TEST(AttentionTest, SingleTokenReducesToValueThenOutputProjection) {
  Rng rng(7);
  MultiHeadAttention<double> attn(8, 2);
  attn.init(rng, 0.3);
  const MatrixD x = random_matrix(1, 8, rng);
  const MatrixD got = attn.forward(x, nullptr);
  const MatrixD want = attn.output().forward(attn.value().forward(x));
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(AttentionTest, ZeroInputWithZeroBiasesGivesZero) {
  Rng rng(8);
  MultiHeadAttention<double> attn(8, 4);
  attn.init(rng, 0.3);
  const MatrixD y = attn.forward(MatrixD(5, 8), nullptr);
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(AttentionTest, AttentionProbabilitiesSumToOne) {
  Rng rng(9);
  MultiHeadAttention<float> attn(16, 2);
  attn.init(rng, 0.5);
  AttentionCache<float> cache;
  attn.forward(cast<float>(random_matrix(6, 16, rng)), &cache);
  ASSERT_EQ(cache.probs.size(), 2u);
  for (const auto& p : cache.probs) {
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double sum = 0.0;
      for (float v : p.row(r)) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-5);
    }
  }
}

TEST(AttentionTest, IndivisibleHeadCountIsConfigError) {
  EXPECT_THROW(MultiHeadAttention<float>(10, 3), ConfigError);
}

TEST(AttentionTest, GradientMatchesFiniteDifferences) {
  Rng rng(10);
  MultiHeadAttention<double> attn(16, 2);
  attn.init(rng, 0.3);
  ParameterList<double> params;
  attn.collect("attn", params);
  perturb(params, rng, 0.1);
  const auto forward = [&](const MatrixD& x) {
    return attn.forward(x, nullptr);
  };
  const auto backward = [&](const MatrixD& x, const MatrixD& dy) {
    AttentionCache<double> cache;
    attn.forward(x, &cache);
    return attn.backward(dy, cache);
  };
  // Adding a constant key bias shifts every score of a row equally, which
  // the softmax ignores.
  const LayerCheck c = check_layer(params, random_matrix(6, 16, rng), forward,
                                   backward, rng, {"attn.k.bias"});
  EXPECT_LE(c.max_rel_error, kTolerance) << c.worst;
  EXPECT_LE(c.max_zero_analytic, 1e-12);
  EXPECT_LE(c.max_zero_numeric, 1e-8);
}

TEST(FeedForwardTest, ZeroInputWithZeroBiasesGivesZero) {
  Rng rng(11);
  FeedForward<double> ffn(8, 16);
  ffn.init(rng, 0.3);
  const MatrixD y = ffn.forward(MatrixD(3, 8), nullptr);
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(FeedForwardTest, DeadReluOutputsSecondBias) {
  Rng rng(12);
  FeedForward<double> ffn(8, 16);
  ffn.init(rng, 0.01);
  ffn.fc1().bias().value.fill(-100.0);
  for (std::size_t j = 0; j < 8; ++j) ffn.fc2().bias().value[j] = 0.25 * j;
  const MatrixD y = ffn.forward(random_matrix(4, 8, rng), nullptr);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(y(r, j), 0.25 * j);
  }
}

TEST(FeedForwardTest, GradientMatchesFiniteDifferences) {
  Rng rng(13);
  FeedForward<double> ffn(8, 16);
  ffn.init(rng, 0.3);
  ParameterList<double> params;
  ffn.collect("ffn", params);
  perturb(params, rng, 0.1);
  const auto forward = [&](const MatrixD& x) {
    return ffn.forward(x, nullptr);
  };
  const auto backward = [&](const MatrixD& x, const MatrixD& dy) {
    FeedForwardCache<double> cache;
    ffn.forward(x, &cache);
    return ffn.backward(dy, cache);
  };
  const LayerCheck c = check_layer(params, random_matrix(5, 8, rng), forward,
                                   backward, rng);
  EXPECT_LE(c.max_rel_error, kTolerance) << c.worst;
}

TEST(EncoderLayerTest, GradientMatchesFiniteDifferencesWithDropout) {
  Rng rng(14);
  EncoderLayer<double> layer(8, 2, 16, 0.2);
  layer.init(rng, 0.3);
  ParameterList<double> params;
  layer.collect("enc", params);
  perturb(params, rng, 0.1);
  // The same seed gives the same masks on every evaluation.
  const auto forward = [&](const MatrixD& x) {
    Rng drop(99);
    return layer.forward(x, true, drop, nullptr);
  };
  const auto backward = [&](const MatrixD& x, const MatrixD& dy) {
    Rng drop(99);
    EncoderLayerCache<double> cache;
    layer.forward(x, true, drop, &cache);
    return layer.backward(dy, cache);
  };
  const LayerCheck c = check_layer(params, random_matrix(5, 8, rng), forward,
                                   backward, rng);
  EXPECT_LE(c.max_rel_error, kTolerance) << c.worst;
}

TEST(EncoderLayerTest, InferenceIsDeterministic) {
  Rng rng(15);
  EncoderLayer<float> layer(16, 2, 32, 0.1);
  layer.init(rng, 0.02);
  const Matrix x = cast<float>(random_matrix(7, 16, rng));
  Rng a(1), b(2);
  EXPECT_EQ(layer.forward(x, false, a, nullptr),
            layer.forward(x, false, b, nullptr));
}

TEST(DropoutTest, ZeroRateIsIdentity) {
  Rng rng(16);
  const Matrix x = cast<float>(random_matrix(4, 4, rng));
  EXPECT_EQ(dropout(x, 0.0, rng, true).output, x);
}

TEST(DropoutTest, InferenceIsIdentity) {
  Rng rng(17);
  const Matrix x = cast<float>(random_matrix(4, 4, rng));
  EXPECT_EQ(dropout(x, 0.7, rng, false).output, x);
}

TEST(DropoutTest, ExpectationIsPreserved) {
  Rng rng(18);
  const Matrix x(1000, 1000, 1.0f);
  const auto r = dropout(x, 0.5, rng, true);
  double sum = 0.0;
  for (float v : r.output.values()) sum += v;
  EXPECT_NEAR(sum / 1e6, 1.0, 0.01);
}

TEST(DropoutTest, SameSeedSameMask) {
  const Matrix x(8, 8, 1.0f);
  Rng a(5), b(5);
  EXPECT_EQ(dropout(x, 0.3, a, true).mask, dropout(x, 0.3, b, true).mask);
}

}  // namespace
}  // namespace guided
