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

#include "guided/optim.hpp"

#include <cmath>

namespace guided {

template <typename T>
AdamW<T>::AdamW(ParameterList<T> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  if (!(config_.lr > 0.0) || config_.weight_decay < 0.0) {
    throw ConfigError("adamw: lr must be positive and weight decay "
                      "non-negative");
  }
  first_moment_.reserve(params_.size());
  second_moment_.reserve(params_.size());
  for (const auto& p : params_) {
    first_moment_.emplace_back(p.param->value.rows(), p.param->value.cols());
    second_moment_.emplace_back(p.param->value.rows(), p.param->value.cols());
  }
}

template <typename T>
void AdamW<T>::step() {
  ++step_;
  const double t = static_cast<double>(step_);
  const double bias1 = 1.0 - std::pow(config_.beta1, t);
  const double bias2 = 1.0 - std::pow(config_.beta2, t);
  const double decay = 1.0 - config_.lr * config_.weight_decay;

  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter<T>& p = *params_[i].param;
    BasicMatrix<T>& m = first_moment_[i];
    BasicMatrix<T>& v = second_moment_[i];
    if (!p.grad.same_shape(p.value) || !m.same_shape(p.value)) {
      throw DimensionError("adamw: parameter " + params_[i].name +
                           " changed shape to " + p.value.shape_string());
    }
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = static_cast<double>(p.grad[j]);
      const double mj =
          config_.beta1 * static_cast<double>(m[j]) + (1.0 - config_.beta1) * g;
      const double vj = config_.beta2 * static_cast<double>(v[j]) +
                        (1.0 - config_.beta2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double m_hat = mj / bias1;
      const double v_hat = vj / bias2;
      const double updated = static_cast<double>(p.value[j]) * decay -
                             config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
      p.value[j] = static_cast<T>(updated);
    }
  }
}

template <typename T>
void AdamW<T>::zero_grad() {
  for (auto& p : params_) p.param->zero_grad();
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace guided
