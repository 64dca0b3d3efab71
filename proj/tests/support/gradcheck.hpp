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

#ifndef GUIDED_TESTS_SUPPORT_GRADCHECK_HPP_
#define GUIDED_TESTS_SUPPORT_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "guided/guidance.hpp"
#include "guided/rng.hpp"
#include "guided/tensor.hpp"

namespace guided::testing {

// Central-difference check of the end-to-end BCE gradient of a double
// guidance model over a small batch.
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t entries = 0;
  // Entries whose +h and -h evaluations fall on different sides of a ReLU
  // kink; central differences are meaningless there.
  std::size_t kink_skipped = 0;
};

inline double relative_error(double analytic, double numeric) {
  // Entries whose true gradient is below round-off are compared absolutely.
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

inline GuidanceConfig tiny_guidance_config() {
  GuidanceConfig c;
  c.model_dim = 16;
  c.layers = 2;
  c.heads = 2;
  c.ffn_dim = 32;
  c.dropout = 0.1;
  c.window_frames = 5;
  c.modalities = {.visual = true, .audio = true, .text = true};
  c.mode = GuidanceMode::kQueryDependent;
  c.visual_dim = 6;
  c.audio_dim = 5;
  c.text_dim = 6;
  c.text_len = 3;
  return c;
}

inline MatrixD random_matrix(std::size_t rows, std::size_t cols, Rng& rng,
                             double sd = 1.0) {
  MatrixD m(rows, cols);
  for (double& v : m.values()) v = rng.normal(0.0, sd);
  return m;
}

inline GradCheckReport check_guidance_gradients(std::uint64_t seed,
                                                std::size_t batch = 4,
                                                double h = 1e-5) {
  const GuidanceConfig cfg = tiny_guidance_config();
  BasicGuidanceModel<double> model(cfg);
  model.init(seed);
  // Move away from the near-zero initialization so every path carries
  // gradient.
  Rng perturb(derive_seed(seed, {99}));
  for (auto& p : model.parameters()) {
    for (double& v : p.param->value.values()) v += perturb.normal(0.0, 0.3);
  }

  Rng data(derive_seed(seed, {7}));
  std::vector<MatrixD> visual, audio, text;
  std::vector<bool> labels;
  for (std::size_t i = 0; i < batch; ++i) {
    visual.push_back(random_matrix(cfg.window_frames, cfg.visual_dim, data));
    audio.push_back(random_matrix(cfg.window_frames, cfg.audio_dim, data));
    text.push_back(random_matrix(cfg.text_len, cfg.text_dim, data));
    labels.push_back(i % 2 == 0);
  }
  const auto inputs = [&](std::size_t i) {
    return WindowInputs<double>{&visual[i], &audio[i], &text[i]};
  };
  // Loss plus the sign pattern of every ReLU input.
  const auto loss = [&](std::vector<bool>* pattern) {
    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
      Rng rng(derive_seed(seed, {1000 + i}));
      GuidanceCache<double> cache;
      total += bce_loss(model.logit(inputs(i), true, rng, &cache), labels[i]);
      for (const auto& layer : cache.layers) {
        for (double v : layer.ffn.pre_activation.values()) {
          pattern->push_back(v > 0.0);
        }
      }
      for (double v : cache.head_pre.values()) pattern->push_back(v > 0.0);
    }
    return total / static_cast<double>(batch);
  };

  model.zero_grad();
  for (std::size_t i = 0; i < batch; ++i) {
    Rng rng(derive_seed(seed, {1000 + i}));
    GuidanceCache<double> cache;
    const double z = model.logit(inputs(i), true, rng, &cache);
    model.backward(bce_grad(z, labels[i]) / static_cast<double>(batch), cache);
  }

  GradCheckReport report;
  for (auto& p : model.parameters()) {
    auto& value = p.param->value;
    const auto& grad = p.param->grad;
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double saved = value[j];
      std::vector<bool> up_pattern, down_pattern;
      value[j] = saved + h;
      const double up = loss(&up_pattern);
      value[j] = saved - h;
      const double down = loss(&down_pattern);
      value[j] = saved;
      if (up_pattern != down_pattern) {
        ++report.kink_skipped;
        continue;
      }
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(grad[j], numeric);
      ++report.entries;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_parameter = p.name + "[" + std::to_string(j) + "]";
      }
    }
  }
  return report;
}

}  // namespace guided::testing

#endif  // GUIDED_TESTS_SUPPORT_GRADCHECK_HPP_
