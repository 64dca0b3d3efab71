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

#include "guided/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "guided/errors.hpp"

namespace guided {

bool Interval::valid() const {
  return std::isfinite(start_s) && std::isfinite(end_s) && start_s >= 0.0 &&
         start_s <= end_s;
}

double overlap_length(const Interval& a, const Interval& b) {
  return std::max(0.0, std::min(a.end_s, b.end_s) -
                           std::max(a.start_s, b.start_s));
}

double tiou(const Interval& a, const Interval& b) {
  const double inter = overlap_length(a, b);
  const double union_len = a.length() + b.length() - inter;
  if (union_len <= 0.0) {
    // Both zero-length.
    return a == b ? 1.0 : 0.0;
  }
  return std::clamp(inter / union_len, 0.0, 1.0);
}

std::vector<Window> generate_windows(std::size_t num_frames, double fps,
                                     std::size_t window_len,
                                     std::size_t stride) {
  if (window_len < 1 || stride < 1 || stride > window_len) {
    throw ConfigError("generate_windows: need window_len >= 1 and 1 <= "
                      "stride <= window_len, got window_len=" +
                      std::to_string(window_len) +
                      " stride=" + std::to_string(stride));
  }
  if (!(fps > 0.0) || !std::isfinite(fps)) {
    throw ConfigError("generate_windows: fps must be positive");
  }
  std::vector<Window> windows;
  for (std::size_t start = 0; start < num_frames; start += stride) {
    Window w;
    w.index = windows.size();
    w.frame_start = start;
    w.frame_len = window_len;
    w.interval = {static_cast<double>(start) / fps,
                  static_cast<double>(start + window_len) / fps};
    windows.push_back(w);
  }
  return windows;
}

std::vector<Window> generate_windows(std::size_t num_frames, double fps,
                                     std::size_t window_len) {
  return generate_windows(num_frames, fps, window_len,
                          std::max<std::size_t>(1, window_len / 2));
}

std::size_t assign_best_window(const Interval& m,
                               std::span<const Window> windows) {
  if (windows.empty()) {
    throw UsageError("assign_best_window: empty window list");
  }
  std::size_t best = 0;
  double best_iou = tiou(m, windows[0].interval);
  for (std::size_t i = 1; i < windows.size(); ++i) {
    const double iou = tiou(m, windows[i].interval);
    if (iou > best_iou) {
      best_iou = iou;
      best = i;
    }
  }
  return best;
}

std::vector<std::size_t> ranking_order(std::span<const ScoredMoment> moments) {
  std::vector<std::size_t> order(moments.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) {
                     const ScoredMoment& a = moments[x];
                     const ScoredMoment& b = moments[y];
                     if (a.score != b.score) return a.score > b.score;
                     if (a.interval.start_s != b.interval.start_s) {
                       return a.interval.start_s < b.interval.start_s;
                     }
                     return a.interval.length() < b.interval.length();
                   });
  return order;
}

std::vector<std::size_t> nms_indices(std::span<const ScoredMoment> moments,
                                     double threshold) {
  const std::vector<std::size_t> order = ranking_order(moments);
  std::vector<std::size_t> kept;
  std::vector<char> suppressed(moments.size(), 0);
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (suppressed[i]) continue;
    kept.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!suppressed[j] &&
          tiou(moments[i].interval, moments[j].interval) > threshold) {
        suppressed[j] = 1;
      }
    }
  }
  return kept;
}

std::vector<ScoredMoment> nms(std::span<const ScoredMoment> moments,
                              double threshold) {
  std::vector<ScoredMoment> out;
  for (std::size_t i : nms_indices(moments, threshold)) {
    out.push_back(moments[i]);
  }
  return out;
}

}  // namespace guided
