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

#ifndef GUIDED_DATASET_HPP_
#define GUIDED_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "guided/temporal.hpp"
#include "guided/tensor.hpp"

namespace guided {

// ---------------------------------------------------------------------------
// EMB1 embedding files: "EMB1", rows (u32 LE), cols (u32 LE), then
// rows*cols float32 LE values in row-major order.

void write_emb1(std::ostream& os, const Matrix& m);
// `what` names the source in error messages.
Matrix read_emb1(std::istream& is, const std::string& what);

void write_embeddings(const std::filesystem::path& path, const Matrix& m);
Matrix load_embeddings(const std::filesystem::path& path);
// Also checks the column count against the dataset header; `field` names the
// offending dimension in the error.
Matrix load_embeddings(const std::filesystem::path& path,
                       std::size_t expected_cols, std::string_view field);

// ---------------------------------------------------------------------------
// Records

struct EmbeddingDims {
  std::size_t visual = 512;
  std::size_t audio = 512;
  std::size_t text = 512;
  // Fixed query length; token matrices are zero-padded or truncated to it.
  std::size_t text_len = 4;

  bool operator==(const EmbeddingDims&) const = default;
};

struct VideoRecord {
  std::string id;
  double fps = 5.0;
  std::size_t num_frames = 0;
  std::string visual;                // path relative to the dataset root
  std::optional<std::string> audio;  // same frame rate as `visual`

  double duration_s() const { return static_cast<double>(num_frames) / fps; }
  bool operator==(const VideoRecord&) const = default;
};

enum class Split { kTrain, kVal, kTest };

std::string_view split_name(Split s);
Split parse_split(std::string_view name);

struct QueryRecord {
  std::string id;
  std::string video_id;
  std::string tokens;  // path relative to the dataset root
  Interval ground_truth;
  bool actionless = false;
  Split split = Split::kTrain;

  bool operator==(const QueryRecord&) const = default;
};

class GroundingDataset {
 public:
  EmbeddingDims dims;
  std::vector<VideoRecord> videos;
  std::vector<QueryRecord> queries;
  std::filesystem::path root;

  // Throws DataError for unknown ids.
  const VideoRecord& video(std::string_view id) const;
  const QueryRecord& query(std::string_view id) const;
  std::vector<const QueryRecord*> queries_for_video(std::string_view id) const;
  std::vector<const QueryRecord*> queries_in(Split split) const;
  // Videos that have at least one query in `split`, in dataset order.
  std::vector<const VideoRecord*> videos_in(Split split) const;
  // Ground-truth intervals of every query on the video.
  std::vector<Interval> moments_for_video(std::string_view id) const;

  // Checks reference integrity, interval bounds and non-degenerate moments.
  // Throws DataError.
  void validate() const;

  bool operator==(const GroundingDataset& other) const {
    return dims == other.dims && videos == other.videos &&
           queries == other.queries;
  }
};

// Annotation document:
//   {dims:{visual,audio,text,text_len},
//    videos:[{id,fps,num_frames,visual,audio}],
//    queries:[{id,video_id,tokens,start_s,end_s,actionless,split}]}
// Serialization is canonical (sorted keys, fixed indentation).
std::string serialize_annotations(const GroundingDataset& ds);
GroundingDataset parse_annotations(std::string_view json_text,
                                   const std::filesystem::path& root);

// {root}/annotations.json
GroundingDataset load_dataset(const std::filesystem::path& root);
void save_annotations(const GroundingDataset& ds);

// In-memory features for a dataset, validated against the header dims and
// the declared frame counts.
struct VideoFeatures {
  Matrix visual;
  std::optional<Matrix> audio;
};

class FeatureStore {
 public:
  // Loads every video and query file. `need_audio` makes missing audio a
  // data error.
  static FeatureStore load(const GroundingDataset& ds, bool need_audio = false);

  const VideoFeatures& video(std::string_view id) const;
  // L_tg x D_t token matrix, padded or truncated to dims.text_len.
  const Matrix& tokens(std::string_view query_id) const;

 private:
  std::map<std::string, VideoFeatures, std::less<>> videos_;
  std::map<std::string, Matrix, std::less<>> tokens_;
};

// Pads with zero rows or truncates to exactly `rows` rows.
Matrix fit_rows(const Matrix& m, std::size_t rows);

// ---------------------------------------------------------------------------
// Supervision labels

struct LabeledWindow {
  std::string video_id;
  Window window;
  bool label = false;
  std::optional<std::string> query_id;  // set only in query-dependent mode
};

// Positive iff tIoU(window, g) > 0.
std::vector<LabeledWindow> label_windows_query_dependent(
    std::string_view video_id, std::span<const Window> windows,
    const Interval& ground_truth, std::string_view query_id);

// Positive iff the window overlaps any of the video's moments.
std::vector<LabeledWindow> label_windows_query_agnostic(
    std::string_view video_id, std::span<const Window> windows,
    std::span<const Interval> moments);

// ---------------------------------------------------------------------------
// Short-form setup: consecutive non-overlapping clips, each paired with the
// moment of largest raw overlap (earliest moment on ties). Clips with no
// overlap are dropped.

struct ShortformClip {
  Interval clip;
  Interval assigned;
};

std::vector<ShortformClip> make_shortform_setup(
    const VideoRecord& video, std::span<const Interval> moments,
    double window_len_s);

// ---------------------------------------------------------------------------
// Planted-signal synthetic data.

struct SyntheticConfig {
  std::size_t num_videos = 20;
  std::size_t frames_per_video = 512;
  std::size_t moments_per_video = 3;
  EmbeddingDims dims{.visual = 512, .audio = 512, .text = 512, .text_len = 4};
  // Dimension of the latent moment signature u.
  std::size_t signature_dim = 16;
  std::size_t min_moment_frames = 20;
  std::size_t max_moment_frames = 60;
  double fps = 5.0;
  double signal_strength = 2.0;  // alpha
  double noise_scale = 1.0;      // sigma
  double query_noise = 0.02;     // per-element std on query tokens
  double actionless_fraction = 0.25;
  bool with_audio = true;
  // Videos are split in order: the first train_fraction go to train, the
  // next val_fraction to val, the rest to test.
  double train_fraction = 0.6;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

// Writes {out_dir}/annotations.json and {out_dir}/features/*.emb and returns
// the dataset. A pure function of `cfg`.
GroundingDataset generate_synthetic(const SyntheticConfig& cfg,
                                    const std::filesystem::path& out_dir);

}  // namespace guided

#endif  // GUIDED_DATASET_HPP_
