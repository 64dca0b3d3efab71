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

#ifndef GUIDED_PIPELINE_HPP_
#define GUIDED_PIPELINE_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "guided/dataset.hpp"
#include "guided/eval.hpp"
#include "guided/fusion.hpp"
#include "guided/grounding.hpp"
#include "guided/guidance.hpp"
#include "guided/run_config.hpp"

namespace guided {

// Guidance windows of one video for a model configuration (stride L_vg/2).
std::vector<Window> guidance_windows(const VideoRecord& video,
                                     const GuidanceConfig& config,
                                     std::size_t stride_frames = 0);

// Labeled guidance windows for every video (agnostic) or query (dependent)
// of a split.
std::vector<LabeledWindow> guidance_labels(const GroundingDataset& ds,
                                           Split split,
                                           const GuidanceConfig& config,
                                           std::size_t stride_frames = 0);

// Trains on the train split and logs validation loss on the val split.
TrainResult train_stage(const RunConfig& cfg, const GroundingDataset& ds,
                        const FeatureStore& features);

// p* for every guidance window of the split: one record per video in
// agnostic mode, one per query in dependent mode.
GuidanceFile score_stage(const RunConfig& cfg, const GroundingDataset& ds,
                         const FeatureStore& features,
                         const GuidanceModel& model,
                         ScoringStats* stats = nullptr);

// AUROC of the guidance scores against the window labels of the split.
double guidance_auroc(const GroundingDataset& ds, Split split,
                      const GuidanceConfig& config, const GuidanceFile& scores);

std::unique_ptr<GroundingScorer> make_scorer(const RunConfig& cfg);

// Raw long-form predictions for every query of the split, in dataset order.
std::vector<QueryPredictions> ground_stage(const RunConfig& cfg,
                                           const GroundingDataset& ds,
                                           const FeatureStore& features,
                                           const GroundingScorer& scorer);

// Fuses with `guidance` when given, then re-ranks and applies NMS.
std::vector<QueryPredictions> fuse_stage(
    const RunConfig& cfg, const GroundingDataset& ds,
    std::span<const QueryPredictions> predictions,
    const GuidanceFile* guidance);

// ---------------------------------------------------------------------------
// Inference cost accounting.

struct CostReport {
  GuidanceMode mode = GuidanceMode::kQueryAgnostic;
  std::size_t videos = 0;
  std::size_t queries = 0;
  // Closed-form counts.
  std::uint64_t guidance_passes = 0;
  std::uint64_t grounding_passes = 0;
  // Counts observed while running the stages.
  std::uint64_t measured_guidance_passes = 0;
  std::uint64_t measured_grounding_passes = 0;
  std::map<std::string, std::size_t> guidance_windows_per_video;
  std::map<std::string, std::size_t> grounding_windows_per_video;
  double guidance_seconds = 0.0;
  double grounding_seconds = 0.0;

  bool counts_match() const {
    return guidance_passes == measured_guidance_passes &&
           grounding_passes == measured_grounding_passes;
  }
};

// Formula-only counts over every video and query of the dataset.
CostReport expected_cost(const GroundingDataset& ds,
                         const GuidanceConfig& config,
                         const LongformConfig& longform);

// Runs guidance scoring and long-form grounding over the whole dataset with
// an instrumented counter and wall-clock timing.
CostReport bench_cost(const RunConfig& cfg, const GroundingDataset& ds,
                      const FeatureStore& features, const GuidanceModel& model);

std::string cost_to_json(const CostReport& report);

}  // namespace guided

#endif  // GUIDED_PIPELINE_HPP_
