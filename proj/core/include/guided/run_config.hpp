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

#ifndef GUIDED_RUN_CONFIG_HPP_
#define GUIDED_RUN_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "guided/dataset.hpp"
#include "guided/eval.hpp"
#include "guided/grounding.hpp"
#include "guided/guidance.hpp"

namespace guided {

enum class GrounderKind { kNoisyOracle, kSimilarity };

std::string_view grounder_name(GrounderKind kind);
GrounderKind parse_grounder(std::string_view name);

struct GrounderConfig {
  GrounderKind kind = GrounderKind::kNoisyOracle;
  NoisyOracleConfig oracle;  // seed is taken from RunConfig::seed
};

// One JSON document drives every subcommand:
//   {dataset, output, seed, threads, mode, modalities, split,
//    synthetic:{...}, guidance:{...}, train:{...}, longform:{...},
//    grounder:{...}, eval:{...}}
// Unknown keys anywhere are rejected.
struct RunConfig {
  std::filesystem::path dataset = "data";
  std::filesystem::path output = "out";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  GuidanceMode mode = GuidanceMode::kQueryDependent;
  // Defaults to visual+audio, plus text in dependent mode, when absent.
  ModalityMask modalities{.visual = true, .audio = true, .text = true};
  Split split = Split::kTest;  // split scored, grounded and evaluated

  SyntheticConfig synthetic;
  // Architecture only; mode, modalities and input widths come from the
  // fields above and the dataset header.
  GuidanceConfig guidance;
  TrainConfig train;
  LongformConfig longform;
  GrounderConfig grounder;
  EvalConfig eval;

  // Checks every block. Throws ConfigError.
  void validate() const;

  // The model configuration for a dataset with the given dims.
  GuidanceConfig guidance_for(const EmbeddingDims& dims) const;
  // Train settings with the run's seed and thread count filled in.
  TrainConfig train_for() const;
};

// `overrides` are "dot.path=value" strings; values parse as JSON and fall
// back to plain strings. Throws ConfigError.
RunConfig parse_run_config(std::string_view json_text,
                           std::span<const std::string> overrides = {});
RunConfig load_run_config(const std::filesystem::path& path,
                          std::span<const std::string> overrides = {});
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace guided

#endif  // GUIDED_RUN_CONFIG_HPP_
