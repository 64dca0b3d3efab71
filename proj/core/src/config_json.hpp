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

#ifndef GUIDED_SRC_CONFIG_JSON_HPP_
#define GUIDED_SRC_CONFIG_JSON_HPP_

#include <initializer_list>
#include <string>
#include <string_view>
#include <type_traits>

#include "guided/errors.hpp"
#include "guided/guidance.hpp"
#include "json.hpp"

namespace guided::detail {

using nlohmann::json;

// Throws ConfigError naming the first key of `obj` not in `allowed`.
void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                std::string_view where);

void require_object(const json& obj, std::string_view where);

// Reads obj[key] into `out` when present. Type mismatches become
// ConfigError mentioning `where.key`.
template <typename T>
void read_field(const json& obj, std::string_view key, T& out,
                std::string_view where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (it->is_number_integer() && it->template get<long long>() < 0) {
        throw ConfigError(std::string(where) + "." + std::string(key) +
                          " must be non-negative");
      }
      if (!it->is_number_integer()) {
        throw ConfigError(std::string(where) + "." + std::string(key) +
                          " must be an integer");
      }
    }
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) {
        throw ConfigError(std::string(where) + "." + std::string(key) +
                          " must be a boolean");
      }
    }
    out = it->template get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(where) + "." + std::string(key) +
                      ": " + e.what());
  }
}

json to_json(const ModalityMask& m);
ModalityMask modality_mask_from_json(const json& j, std::string_view where);

// Full model configuration, including mode and input widths.
json to_json(const GuidanceConfig& c);
GuidanceConfig guidance_config_from_json(const json& j,
                                         std::string_view where = "guidance");

}  // namespace guided::detail

#endif  // GUIDED_SRC_CONFIG_JSON_HPP_
