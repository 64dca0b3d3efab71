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

#ifndef GUIDED_TEMPORAL_HPP_
#define GUIDED_TEMPORAL_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace guided {

// A closed temporal extent in seconds.
struct Interval {
  double start_s = 0.0;
  double end_s = 0.0;

  double length() const { return end_s - start_s; }
  // start <= end, both finite and non-negative.
  bool valid() const;
  bool contains(const Interval& other) const {
    return start_s <= other.start_s && other.end_s <= end_s;
  }

  bool operator==(const Interval&) const = default;
};

// A fixed-length window over a video's frame grid.
struct Window {
  std::size_t index = 0;
  Interval interval;
  std::size_t frame_start = 0;
  std::size_t frame_len = 0;
};

struct ScoredMoment {
  Interval interval;
  double score = 0.0;
  std::optional<std::size_t> source_window;

  bool operator==(const ScoredMoment&) const = default;
};

// Temporal IoU, in [0, 1]. Two identical zero-length intervals have IoU 1;
// any other pair with an empty union has IoU 0.
double tiou(const Interval& a, const Interval& b);

// Length of the intersection (0 when disjoint).
double overlap_length(const Interval& a, const Interval& b);

// Window starts 0, stride, 2*stride, ... while start < num_frames. Tail
// windows keep `window_len` frames and may extend past the video end.
// Throws ConfigError unless window_len >= 1, 1 <= stride <= window_len and
// fps > 0.
std::vector<Window> generate_windows(std::size_t num_frames, double fps,
                                     std::size_t window_len,
                                     std::size_t stride);
// Same, with stride = window_len / 2 (at least 1).
std::vector<Window> generate_windows(std::size_t num_frames, double fps,
                                     std::size_t window_len);

// Index (position in `windows`) of the window with maximal tIoU against m;
// ties resolve to the lowest position. Throws UsageError on an empty list.
std::size_t assign_best_window(const Interval& m,
                               std::span<const Window> windows);

// Ranking order used everywhere: score descending, then earlier start, then
// shorter length, then original position. Returns positions into `moments`.
std::vector<std::size_t> ranking_order(std::span<const ScoredMoment> moments);

// Greedy 1-D NMS. Returns positions (into `moments`) of the kept moments in
// keep order. A candidate is dropped when its tIoU with an already kept
// moment is strictly greater than `threshold`.
std::vector<std::size_t> nms_indices(std::span<const ScoredMoment> moments,
                                     double threshold);

std::vector<ScoredMoment> nms(std::span<const ScoredMoment> moments,
                              double threshold);

}  // namespace guided

#endif  // GUIDED_TEMPORAL_HPP_
