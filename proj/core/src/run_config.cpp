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

#include "guided/run_config.hpp"

#include <fstream>
#include <sstream>

#include "config_json.hpp"
#include "guided/errors.hpp"

namespace guided {

using detail::check_keys;
using detail::json;
using detail::read_field;

std::string_view grounder_name(GrounderKind kind) {
  return kind == GrounderKind::kSimilarity ? "similarity" : "noisy-oracle";
}

GrounderKind parse_grounder(std::string_view name) {
  if (name == "noisy-oracle") return GrounderKind::kNoisyOracle;
  if (name == "similarity") return GrounderKind::kSimilarity;
  throw ConfigError("unknown grounder \"" + std::string(name) +
                    "\" (expected noisy-oracle or similarity)");
}

void RunConfig::validate() const {
  if (threads == 0) throw ConfigError("threads must be positive");
  if (mode == GuidanceMode::kQueryDependent && !modalities.text) {
    throw ConfigError("dependent mode needs modalities.text = true");
  }
  if (mode == GuidanceMode::kQueryAgnostic && modalities.text) {
    throw ConfigError("agnostic mode needs modalities.text = false");
  }
  synthetic.validate();
  guidance_for(synthetic.dims).validate();
  train_for().validate();
  longform.validate();
  grounder.oracle.validate();
  eval.validate();
}

GuidanceConfig RunConfig::guidance_for(const EmbeddingDims& dims) const {
  GuidanceConfig g = guidance;
  g.mode = mode;
  g.modalities = modalities;
  g.visual_dim = dims.visual;
  g.audio_dim = dims.audio;
  g.text_dim = dims.text;
  g.text_len = dims.text_len;
  return g;
}

TrainConfig RunConfig::train_for() const {
  TrainConfig t = train;
  t.seed = seed;
  t.threads = threads;
  return t;
}

namespace {

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override \"" + assignment + "\" is not key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &doc;
  std::size_t begin = 0;
  while (true) {
    const auto dot = path.find('.', begin);
    const std::string key = path.substr(begin, dot - begin);
    if (key.empty()) throw ConfigError("override path \"" + path + "\" is empty");
    if (!node->is_object()) {
      throw ConfigError("override path \"" + path + "\" crosses a non-object");
    }
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    begin = dot + 1;
  }
}

SyntheticConfig synthetic_from_json(const json& j) {
  constexpr std::string_view kWhere = "synthetic";
  check_keys(j,
             {"num_videos", "frames_per_video", "moments_per_video", "dims",
              "signature_dim", "min_moment_frames", "max_moment_frames", "fps",
              "signal_strength", "noise_scale", "query_noise",
              "actionless_fraction", "with_audio", "train_fraction",
              "val_fraction"},
             kWhere);
  SyntheticConfig s;
  read_field(j, "num_videos", s.num_videos, kWhere);
  read_field(j, "frames_per_video", s.frames_per_video, kWhere);
  read_field(j, "moments_per_video", s.moments_per_video, kWhere);
  if (j.contains("dims")) {
    const json& d = j["dims"];
    check_keys(d, {"visual", "audio", "text", "text_len"}, "synthetic.dims");
    read_field(d, "visual", s.dims.visual, "synthetic.dims");
    read_field(d, "audio", s.dims.audio, "synthetic.dims");
    read_field(d, "text", s.dims.text, "synthetic.dims");
    read_field(d, "text_len", s.dims.text_len, "synthetic.dims");
  }
  read_field(j, "signature_dim", s.signature_dim, kWhere);
  read_field(j, "min_moment_frames", s.min_moment_frames, kWhere);
  read_field(j, "max_moment_frames", s.max_moment_frames, kWhere);
  read_field(j, "fps", s.fps, kWhere);
  read_field(j, "signal_strength", s.signal_strength, kWhere);
  read_field(j, "noise_scale", s.noise_scale, kWhere);
  read_field(j, "query_noise", s.query_noise, kWhere);
  read_field(j, "actionless_fraction", s.actionless_fraction, kWhere);
  read_field(j, "with_audio", s.with_audio, kWhere);
  read_field(j, "train_fraction", s.train_fraction, kWhere);
  read_field(j, "val_fraction", s.val_fraction, kWhere);
  return s;
}

json synthetic_to_json(const SyntheticConfig& s) {
  return {{"num_videos", s.num_videos},
          {"frames_per_video", s.frames_per_video},
          {"moments_per_video", s.moments_per_video},
          {"dims",
           {{"visual", s.dims.visual},
            {"audio", s.dims.audio},
            {"text", s.dims.text},
            {"text_len", s.dims.text_len}}},
          {"signature_dim", s.signature_dim},
          {"min_moment_frames", s.min_moment_frames},
          {"max_moment_frames", s.max_moment_frames},
          {"fps", s.fps},
          {"signal_strength", s.signal_strength},
          {"noise_scale", s.noise_scale},
          {"query_noise", s.query_noise},
          {"actionless_fraction", s.actionless_fraction},
          {"with_audio", s.with_audio},
          {"train_fraction", s.train_fraction},
          {"val_fraction", s.val_fraction}};
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text,
                           std::span<const std::string> overrides) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config is not valid JSON: ") + e.what());
  }
  if (doc.is_null()) doc = json::object();
  detail::require_object(doc, "run config");
  for (const std::string& o : overrides) apply_override(doc, o);

  check_keys(doc,
             {"dataset", "output", "seed", "threads", "mode", "modalities",
              "split", "synthetic", "guidance", "train", "longform", "grounder",
              "eval"},
             "config");
  RunConfig cfg;
  std::string text;
  if (doc.contains("dataset")) {
    read_field(doc, "dataset", text, "config");
    cfg.dataset = text;
  }
  if (doc.contains("output")) {
    read_field(doc, "output", text, "config");
    cfg.output = text;
  }
  read_field(doc, "seed", cfg.seed, "config");
  read_field(doc, "threads", cfg.threads, "config");
  if (doc.contains("mode")) {
    read_field(doc, "mode", text, "config");
    cfg.mode = parse_mode(text);
  }
  cfg.modalities.text = cfg.mode == GuidanceMode::kQueryDependent;
  if (doc.contains("modalities")) {
    ModalityMask defaults = cfg.modalities;
    json m = doc["modalities"];
    check_keys(m, {"visual", "audio", "text"}, "config.modalities");
    read_field(m, "visual", defaults.visual, "config.modalities");
    read_field(m, "audio", defaults.audio, "config.modalities");
    read_field(m, "text", defaults.text, "config.modalities");
    cfg.modalities = defaults;
  }
  if (doc.contains("split")) {
    read_field(doc, "split", text, "config");
    cfg.split = parse_split(text);
  }
  if (doc.contains("synthetic")) cfg.synthetic = synthetic_from_json(doc["synthetic"]);

  if (doc.contains("guidance")) {
    const json& g = doc["guidance"];
    constexpr std::string_view kWhere = "guidance";
    check_keys(g,
               {"model_dim", "layers", "heads", "ffn_dim", "dropout",
                "window_frames"},
               kWhere);
    read_field(g, "model_dim", cfg.guidance.model_dim, kWhere);
    read_field(g, "layers", cfg.guidance.layers, kWhere);
    read_field(g, "heads", cfg.guidance.heads, kWhere);
    read_field(g, "ffn_dim", cfg.guidance.ffn_dim, kWhere);
    read_field(g, "dropout", cfg.guidance.dropout, kWhere);
    read_field(g, "window_frames", cfg.guidance.window_frames, kWhere);
  }
  if (doc.contains("train")) {
    const json& t = doc["train"];
    constexpr std::string_view kWhere = "train";
    check_keys(t,
               {"epochs", "lr", "weight_decay", "batch_size", "eval_every",
                "positive_weight", "window_stride"},
               kWhere);
    read_field(t, "epochs", cfg.train.epochs, kWhere);
    read_field(t, "lr", cfg.train.lr, kWhere);
    read_field(t, "weight_decay", cfg.train.weight_decay, kWhere);
    read_field(t, "batch_size", cfg.train.batch_size, kWhere);
    read_field(t, "eval_every", cfg.train.eval_every, kWhere);
    read_field(t, "positive_weight", cfg.train.positive_weight, kWhere);
    read_field(t, "window_stride", cfg.train.window_stride, kWhere);
  }
  if (doc.contains("longform")) {
    const json& l = doc["longform"];
    constexpr std::string_view kWhere = "longform";
    check_keys(l, {"window_frames", "stride_frames", "proposals"}, kWhere);
    read_field(l, "window_frames", cfg.longform.window_frames, kWhere);
    read_field(l, "stride_frames", cfg.longform.stride_frames, kWhere);
    read_field(l, "proposals", cfg.longform.proposals, kWhere);
  }
  if (doc.contains("grounder")) {
    const json& g = doc["grounder"];
    constexpr std::string_view kWhere = "grounder";
    check_keys(g, {"kind", "jitter_s", "distractors", "score_noise"}, kWhere);
    if (g.contains("kind")) {
      read_field(g, "kind", text, kWhere);
      cfg.grounder.kind = parse_grounder(text);
    }
    read_field(g, "jitter_s", cfg.grounder.oracle.jitter_s, kWhere);
    read_field(g, "distractors", cfg.grounder.oracle.distractors, kWhere);
    read_field(g, "score_noise", cfg.grounder.oracle.score_noise, kWhere);
  }
  if (doc.contains("eval")) {
    const json& e = doc["eval"];
    constexpr std::string_view kWhere = "eval";
    check_keys(e, {"ks", "thresholds", "nms_threshold", "subset"}, kWhere);
    read_field(e, "ks", cfg.eval.ks, kWhere);
    read_field(e, "thresholds", cfg.eval.thresholds, kWhere);
    read_field(e, "nms_threshold", cfg.eval.nms_threshold, kWhere);
    if (e.contains("subset")) {
      read_field(e, "subset", text, kWhere);
      cfg.eval.subset = parse_subset(text);
    }
  }
  cfg.grounder.oracle.seed = cfg.seed;
  cfg.synthetic.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path,
                          std::span<const std::string> overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open run config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), overrides);
}

std::string run_config_to_json(const RunConfig& c) {
  json doc;
  doc["dataset"] = c.dataset.string();
  doc["output"] = c.output.string();
  doc["seed"] = c.seed;
  doc["threads"] = c.threads;
  doc["mode"] = std::string(mode_name(c.mode));
  doc["modalities"] = detail::to_json(c.modalities);
  doc["split"] = std::string(split_name(c.split));
  doc["synthetic"] = synthetic_to_json(c.synthetic);
  doc["guidance"] = {{"model_dim", c.guidance.model_dim},
                     {"layers", c.guidance.layers},
                     {"heads", c.guidance.heads},
                     {"ffn_dim", c.guidance.ffn_dim},
                     {"dropout", c.guidance.dropout},
                     {"window_frames", c.guidance.window_frames}};
  doc["train"] = {{"epochs", c.train.epochs},
                  {"lr", c.train.lr},
                  {"weight_decay", c.train.weight_decay},
                  {"batch_size", c.train.batch_size},
                  {"eval_every", c.train.eval_every},
                  {"positive_weight", c.train.positive_weight},
                  {"window_stride", c.train.window_stride}};
  doc["longform"] = {{"window_frames", c.longform.window_frames},
                     {"stride_frames", c.longform.stride_frames},
                     {"proposals", c.longform.proposals}};
  doc["grounder"] = {{"kind", std::string(grounder_name(c.grounder.kind))},
                     {"jitter_s", c.grounder.oracle.jitter_s},
                     {"distractors", c.grounder.oracle.distractors},
                     {"score_noise", c.grounder.oracle.score_noise}};
  doc["eval"] = {{"ks", c.eval.ks},
                 {"thresholds", c.eval.thresholds},
                 {"nms_threshold", c.eval.nms_threshold},
                 {"subset", std::string(subset_name(c.eval.subset))}};
  return doc.dump(2) + "\n";
}

}  // namespace guided
