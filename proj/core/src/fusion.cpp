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

#include "guided/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "guided/errors.hpp"
#include "json.hpp"

namespace guided {

const GuidanceScores& GuidanceFile::lookup(std::string_view video_id,
                                           std::string_view query_id) const {
  const GuidanceScores* fallback = nullptr;
  for (const GuidanceScores& r : records) {
    if (r.video_id != video_id) continue;
    if (r.query_id && *r.query_id == query_id) return r;
    if (!r.query_id && fallback == nullptr) fallback = &r;
  }
  if (fallback) return *fallback;
  throw DataError("no guidance scores for video " + std::string(video_id) +
                  " (query " + std::string(query_id) + ")");
}

std::string serialize_guidance(const GuidanceFile& file) {
  nlohmann::ordered_json doc;
  doc["window_frames"] = file.window_frames;
  doc["stride_frames"] = file.stride_frames;
  nlohmann::ordered_json records = nlohmann::ordered_json::array();
  for (const GuidanceScores& r : file.records) {
    nlohmann::ordered_json j;
    j["video_id"] = r.video_id;
    if (r.query_id) j["query_id"] = *r.query_id;
    j["scores"] = r.scores;
    records.push_back(std::move(j));
  }
  doc["records"] = std::move(records);
  return doc.dump(1) + "\n";
}

GuidanceFile parse_guidance(std::string_view text) {
  GuidanceFile file;
  try {
    const nlohmann::json doc = nlohmann::json::parse(text);
    file.window_frames = doc.at("window_frames").get<std::size_t>();
    file.stride_frames = doc.at("stride_frames").get<std::size_t>();
    for (const auto& j : doc.at("records")) {
      GuidanceScores r;
      r.video_id = j.at("video_id").get<std::string>();
      if (j.contains("query_id") && !j["query_id"].is_null()) {
        r.query_id = j["query_id"].get<std::string>();
      }
      r.scores = j.at("scores").get<std::vector<double>>();
      file.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("guidance scores: ") + e.what());
  }
  if (file.window_frames == 0 || file.stride_frames == 0) {
    throw FormatError("guidance scores: window_frames and stride_frames must "
                      "be positive");
  }
  for (const GuidanceScores& r : file.records) {
    for (double p : r.scores) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw DataError("guidance scores for video " + r.video_id +
                        " contain a value outside [0, 1]");
      }
    }
  }
  return file;
}

void save_guidance(const std::filesystem::path& path, const GuidanceFile& file) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << serialize_guidance(file);
  if (!out) throw IoError("short write to " + path.string());
}

GuidanceFile load_guidance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_guidance(ss.str());
}

std::vector<Window> guidance_windows(const VideoRecord& video,
                                     std::size_t window_frames,
                                     std::size_t stride_frames) {
  std::vector<Window> windows =
      stride_frames ? generate_windows(video.num_frames, video.fps,
                                       window_frames, stride_frames)
                    : generate_windows(video.num_frames, video.fps,
                                       window_frames);
  const double duration = video.duration_s();
  for (Window& w : windows) {
    w.interval.end_s = std::min(w.interval.end_s, duration);
  }
  return windows;
}

std::vector<ScoredMoment> fuse_scores(std::span<const ScoredMoment> predictions,
                                      const GuidanceScores& guidance,
                                      std::span<const Window> windows) {
  if (guidance.scores.size() != windows.size()) {
    throw DataError("guidance for video " + guidance.video_id + " has " +
                    std::to_string(guidance.scores.size()) +
                    " scores for " + std::to_string(windows.size()) +
                    " windows");
  }
  std::vector<ScoredMoment> out(predictions.begin(), predictions.end());
  if (out.empty()) return out;
  for (ScoredMoment& m : out) {
    const std::size_t j = assign_best_window(m.interval, windows);
    m.score *= guidance.scores[j];
  }
  return out;
}

std::vector<ScoredMoment> rerank_and_nms(std::span<const ScoredMoment> fused,
                                         double nms_threshold) {
  for (const ScoredMoment& m : fused) {
    if (!std::isfinite(m.score)) {
      throw NumericError("non-finite fused score");
    }
  }
  return nms(fused, nms_threshold);
}

}  // namespace guided
