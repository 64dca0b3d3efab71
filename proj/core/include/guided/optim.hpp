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

#ifndef GUIDED_OPTIM_HPP_
#define GUIDED_OPTIM_HPP_

#include <cstdint>
#include <vector>

#include "guided/layers.hpp"

namespace guided {

struct AdamWConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with decoupled weight decay:
//   p <- p * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)
// with bias-corrected moments. Gradients are read, never cleared.
template <typename T>
class AdamW {
 public:
  AdamW(ParameterList<T> params, AdamWConfig config);

  void step();
  void zero_grad();

  std::uint64_t step_count() const { return step_; }
  const AdamWConfig& config() const { return config_; }
  const ParameterList<T>& parameters() const { return params_; }

 private:
  ParameterList<T> params_;
  AdamWConfig config_;
  std::vector<BasicMatrix<T>> first_moment_;
  std::vector<BasicMatrix<T>> second_moment_;
  std::uint64_t step_ = 0;
};

}  // namespace guided

#endif  // GUIDED_OPTIM_HPP_
