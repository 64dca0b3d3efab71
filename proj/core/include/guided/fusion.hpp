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

#ifndef GUIDED_FUSION_HPP_
#define GUIDED_FUSION_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "guided/dataset.hpp"
#include "guided/temporal.hpp"

namespace guided {

// p* for every guidance window of one video (agnostic) or one query
// (dependent), indexed by window ordinal.
struct GuidanceScores {
  std::string video_id;
  std::optional<std::string> query_id;
  std::vector<double> scores;

  bool operator==(const GuidanceScores&) const = default;
};

// Contents of guidance.json.
struct GuidanceFile {
  std::size_t window_frames = 64;
  std::size_t stride_frames = 32;
  std::vector<GuidanceScores> records;

  // Scores that apply to `query_id` on `video_id`: a query-specific record
  // when present, otherwise the video's query-independent one. Throws
  // DataError when neither exists.
  const GuidanceScores& lookup(std::string_view video_id,
                               std::string_view query_id) const;

  bool operator==(const GuidanceFile&) const = default;
};

std::string serialize_guidance(const GuidanceFile& file);
// Throws FormatError on malformed documents and DataError on p* outside
// [0, 1].
GuidanceFile parse_guidance(std::string_view text);
void save_guidance(const std::filesystem::path& path, const GuidanceFile& file);
GuidanceFile load_guidance(const std::filesystem::path& path);

// Guidance windows of a video (stride window_frames / 2 unless given), with
// intervals clipped to the video duration.
std::vector<Window> guidance_windows(const VideoRecord& video,
                                     std::size_t window_frames,
                                     std::size_t stride_frames = 0);

// s*_i = s_i * p*_j with j the best-tIoU guidance window of moment i.
// Throws DataError unless the scores cover every window.
std::vector<ScoredMoment> fuse_scores(std::span<const ScoredMoment> predictions,
                                      const GuidanceScores& guidance,
                                      std::span<const Window> windows);

// Sorts by score with the shared tie rules, then applies NMS.
std::vector<ScoredMoment> rerank_and_nms(std::span<const ScoredMoment> fused,
                                         double nms_threshold);

}  // namespace guided

#endif  // GUIDED_FUSION_HPP_
