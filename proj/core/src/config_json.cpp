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

#include "config_json.hpp"

#include <algorithm>

namespace guided::detail {

void require_object(const json& obj, std::string_view where) {
  if (!obj.is_object()) {
    throw ConfigError(std::string(where) + " must be a JSON object");
  }
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                std::string_view where) {
  require_object(obj, where);
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key \"" + std::string(where) + "." + key + "\"");
    }
  }
}

json to_json(const ModalityMask& m) {
  return {{"visual", m.visual}, {"audio", m.audio}, {"text", m.text}};
}

ModalityMask modality_mask_from_json(const json& j, std::string_view where) {
  check_keys(j, {"visual", "audio", "text"}, where);
  ModalityMask m;
  read_field(j, "visual", m.visual, where);
  read_field(j, "audio", m.audio, where);
  read_field(j, "text", m.text, where);
  return m;
}

json to_json(const GuidanceConfig& c) {
  return {{"model_dim", c.model_dim},
          {"layers", c.layers},
          {"heads", c.heads},
          {"ffn_dim", c.ffn_dim},
          {"dropout", c.dropout},
          {"window_frames", c.window_frames},
          {"modalities", to_json(c.modalities)},
          {"mode", std::string(mode_name(c.mode))},
          {"visual_dim", c.visual_dim},
          {"audio_dim", c.audio_dim},
          {"text_dim", c.text_dim},
          {"text_len", c.text_len}};
}

GuidanceConfig guidance_config_from_json(const json& j, std::string_view where) {
  check_keys(j,
             {"model_dim", "layers", "heads", "ffn_dim", "dropout",
              "window_frames", "modalities", "mode", "visual_dim", "audio_dim",
              "text_dim", "text_len"},
             where);
  GuidanceConfig c;
  read_field(j, "model_dim", c.model_dim, where);
  read_field(j, "layers", c.layers, where);
  read_field(j, "heads", c.heads, where);
  read_field(j, "ffn_dim", c.ffn_dim, where);
  read_field(j, "dropout", c.dropout, where);
  read_field(j, "window_frames", c.window_frames, where);
  if (j.contains("modalities")) {
    c.modalities = modality_mask_from_json(
        j["modalities"], std::string(where) + ".modalities");
  }
  if (j.contains("mode")) {
    std::string mode;
    read_field(j, "mode", mode, where);
    c.mode = parse_mode(mode);
  }
  read_field(j, "visual_dim", c.visual_dim, where);
  read_field(j, "audio_dim", c.audio_dim, where);
  read_field(j, "text_dim", c.text_dim, where);
  read_field(j, "text_len", c.text_len, where);
  return c;
}

}  // namespace guided::detail
