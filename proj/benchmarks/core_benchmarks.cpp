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

#include "guided/rng.hpp"
#include "guided/temporal.hpp"
#include "guided/tensor.hpp"

namespace guided {
namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (float& v : m.values()) v = static_cast<float>(rng.normal());
  return m;
}

std::vector<ScoredMoment> random_moments(std::size_t n, Rng& rng) {
  std::vector<ScoredMoment> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double start = rng.uniform(0.0, 3600.0);
    out.push_back({{start, start + rng.uniform(1.0, 30.0)}, rng.uniform(),
                   std::nullopt});
  }
  return out;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Matrix a = random_matrix(n, n, rng);
  const Matrix b = random_matrix(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(129)->Arg(256);

void BM_Tiou(benchmark::State& state) {
  Rng rng(2);
  const auto m = random_moments(1024, rng);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tiou(m[i % 1024].interval, m[(i + 1) % 1024].interval));
    ++i;
  }
}
BENCHMARK(BM_Tiou);

void BM_Nms(benchmark::State& state) {
  Rng rng(3);
  const auto m = random_moments(static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(nms(m, 0.3));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Nms)->Arg(100)->Arg(1000)->Arg(5000);

}  // namespace
}  // namespace guided
