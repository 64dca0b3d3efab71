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

#ifndef GUIDED_GROUNDING_HPP_
#define GUIDED_GROUNDING_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "guided/dataset.hpp"
#include "guided/rng.hpp"
#include "guided/temporal.hpp"
#include "guided/tensor.hpp"

namespace guided {

// Everything a scorer may look at for one long-form window. Times are local
// to the window: 0 is the window start and `length_s` its (clipped) end.
struct WindowContext {
  std::size_t window_index = 0;
  double fps = 5.0;
  double length_s = 0.0;
  // Valid (non-padded) frames of the window, rows x D_v.
  Matrix frames;
  // L_tg x D_t query tokens.
  const Matrix* tokens = nullptr;
  // Ground truth clipped to the window, local time. Only test doubles read
  // it.
  std::vector<Interval> ground_truth;
  // Per-(query, window) seed for stochastic scorers.
  std::uint64_t seed = 0;
};

// Returns at most `max_proposals` moments, each inside [0, length_s] with a
// score in [0, 1].
class GroundingScorer {
 public:
  virtual ~GroundingScorer() = default;
  virtual std::vector<ScoredMoment> score(const WindowContext& ctx,
                                          std::size_t max_proposals) const = 0;
  virtual std::string name() const = 0;
};

// Cosine similarity of each frame against the mean-pooled query. Runs of
// frames above the 75th percentile become proposals scored (mean + 1) / 2.
std::vector<ScoredMoment> similarity_ground(const Matrix& frames,
                                            const Matrix& tokens, double fps,
                                            std::size_t max_proposals);

class SimilarityScorer final : public GroundingScorer {
 public:
  std::vector<ScoredMoment> score(const WindowContext& ctx,
                                  std::size_t max_proposals) const override;
  std::string name() const override { return "similarity"; }
};

struct NoisyOracleConfig {
  double jitter_s = 2.0;           // boundary noise std
  std::size_t distractors = 6;     // random intervals per window
  double score_noise = 0.2;        // std of the noise on the 0.9 GT score
  std::uint64_t seed = 0;

  // Throws ConfigError on negative or non-finite values.
  void validate() const;
};

// Jittered ground truth scored 0.9 + noise plus uniform distractors scored
// U(0.4, 0.8), truncated to the best `max_proposals`.
std::vector<ScoredMoment> noisy_oracle_ground(
    std::span<const Interval> ground_truth, double window_length_s,
    const NoisyOracleConfig& cfg, Rng& rng, std::size_t max_proposals);

class NoisyOracleScorer final : public GroundingScorer {
 public:
  explicit NoisyOracleScorer(NoisyOracleConfig cfg);
  std::vector<ScoredMoment> score(const WindowContext& ctx,
                                  std::size_t max_proposals) const override;
  std::string name() const override { return "noisy-oracle"; }
  const NoisyOracleConfig& config() const { return cfg_; }

 private:
  NoisyOracleConfig cfg_;
};

struct LongformConfig {
  std::size_t window_frames = 128;  // L_v
  std::size_t stride_frames = 0;    // 0 means window_frames / 2
  std::size_t proposals = 10;       // M

  std::size_t effective_stride() const {
    return stride_frames ? stride_frames
                         : (window_frames / 2 ? window_frames / 2 : 1);
  }
  // Throws ConfigError.
  void validate() const;
};

// The long-form windows of a video; intervals are clipped to its duration.
// A video of at most window_frames frames gets a single window.
std::vector<Window> longform_windows(const VideoRecord& video,
                                     const LongformConfig& cfg);

// Slides the scorer over the video and returns every proposal in global
// time, in window order, each tagged with its source window. Scorer output
// that breaks containment or the score range raises DataError naming the
// window.
std::vector<ScoredMoment> run_longform(const GroundingScorer& scorer,
                                       const VideoRecord& video,
                                       const Matrix& visual,
                                       const Matrix* tokens,
                                       std::span<const Interval> ground_truth,
                                       std::uint64_t query_seed,
                                       const LongformConfig& cfg);

// ---------------------------------------------------------------------------
// Predictions file: one JSON object per line,
//   {"query_id", "start_s", "end_s", "score", "source_window"}.

struct QueryPredictions {
  std::string query_id;
  std::vector<ScoredMoment> moments;
};

void write_predictions(std::ostream& os,
                       std::span<const QueryPredictions> predictions);
void save_predictions(const std::filesystem::path& path,
                      std::span<const QueryPredictions> predictions);
// Groups lines by query in first-appearance order. Throws FormatError on
// malformed lines and DataError on scores outside [0, 1] or invalid
// intervals.
std::vector<QueryPredictions> read_predictions(std::istream& is,
                                               std::string_view what);
std::vector<QueryPredictions> load_predictions(
    const std::filesystem::path& path);

}  // namespace guided

#endif  // GUIDED_GROUNDING_HPP_
