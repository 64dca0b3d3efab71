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

#include <benchmark/benchmark.h>

#include "guided/guidance.hpp"
#include "guided/rng.hpp"

namespace guided {
namespace {

GuidanceConfig bench_config(std::size_t dim, std::size_t layers) {
  GuidanceConfig c;
  c.model_dim = dim;
  c.layers = layers;
  c.heads = dim >= 256 ? 8 : 4;
  c.modalities = {.visual = true, .audio = true, .text = false};
  return c;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (float& v : m.values()) v = static_cast<float>(rng.normal());
  return m;
}

// Encoder forward on one window. Args: model_dim, layers.
void BM_GuidanceForward(benchmark::State& state) {
  const GuidanceConfig cfg = bench_config(state.range(0), state.range(1));
  GuidanceModel model(cfg);
  model.init(1);
  Rng rng(2);
  const Matrix v = random_matrix(cfg.window_frames, cfg.visual_dim, rng);
  const Matrix a = random_matrix(cfg.window_frames, cfg.audio_dim, rng);
  const WindowInputs<float> in{&v, &a, nullptr};
  for (auto _ : state) benchmark::DoNotOptimize(model.probability(in));
}
BENCHMARK(BM_GuidanceForward)->Args({32, 2})->Args({256, 6})
    ->Unit(benchmark::kMillisecond);

// Forward, backward and one AdamW step over a batch of windows.
void BM_TrainingEpoch(benchmark::State& state) {
  GuidanceConfig cfg = bench_config(32, 2);
  cfg.ffn_dim = 128;
  Rng rng(3);
  const Matrix v = random_matrix(512, cfg.visual_dim, rng);
  const Matrix a = random_matrix(512, cfg.audio_dim, rng);
  std::vector<TrainingSample> samples;
  for (std::size_t s = 0; s + cfg.window_frames <= 512; s += 32) {
    samples.push_back({&v, &a, nullptr, s, (s / 32) % 3 == 0});
  }
  TrainConfig t;
  t.epochs = 1;
  t.lr = 1e-3;
  t.batch_size = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_guidance(samples, cfg, t).epoch_loss);
  }
  state.SetItemsProcessed(state.iterations() * samples.size());
}
BENCHMARK(BM_TrainingEpoch)->Arg(16)->Unit(benchmark::kMillisecond);

// p* for every window of a 512-frame video. Arg: threads.
void BM_ScoreWindows(benchmark::State& state) {
  GuidanceConfig cfg = bench_config(32, 2);
  cfg.ffn_dim = 128;
  GuidanceModel model(cfg);
  model.init(4);
  Rng rng(5);
  VideoFeatures video{random_matrix(512, cfg.visual_dim, rng),
                      random_matrix(512, cfg.audio_dim, rng)};
  const auto windows = generate_windows(512, 5.0, cfg.window_frames);
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_windows(model, video, nullptr, windows,
                                           static_cast<std::size_t>(state.range(0))));
  }
  state.SetItemsProcessed(state.iterations() * windows.size());
}
BENCHMARK(BM_ScoreWindows)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace guided

BENCHMARK_MAIN();
