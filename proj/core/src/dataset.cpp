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

#include "guided/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "guided/errors.hpp"
#include "guided/rng.hpp"
#include "json.hpp"

namespace guided {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// EMB1

namespace {

constexpr std::array<char, 4> kEmbMagic = {'E', 'M', 'B', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v & 0xff),
                                 static_cast<char>((v >> 8) & 0xff),
                                 static_cast<char>((v >> 16) & 0xff),
                                 static_cast<char>((v >> 24) & 0xff)};
  os.write(b.data(), 4);
}

bool get_u32(std::istream& is, std::uint32_t& v) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) |
      (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace

void write_emb1(std::ostream& os, const Matrix& m) {
  if (m.rows() > UINT32_MAX || m.cols() > UINT32_MAX) {
    throw DimensionError("EMB1 cannot store " + m.shape_string());
  }
  os.write(kEmbMagic.data(), 4);
  put_u32(os, static_cast<std::uint32_t>(m.rows()));
  put_u32(os, static_cast<std::uint32_t>(m.cols()));
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(m.size() * sizeof(float)));
  } else {
    for (float f : m.values()) put_u32(os, std::bit_cast<std::uint32_t>(f));
  }
}

Matrix read_emb1(std::istream& is, const std::string& what) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || magic != kEmbMagic) {
    throw FormatError(what + ": bad magic (expected \"EMB1\")");
  }
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  if (!get_u32(is, rows)) throw FormatError(what + ": truncated rows header");
  if (!get_u32(is, cols)) throw FormatError(what + ": truncated cols header");
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  std::vector<float> data(count);
  if constexpr (std::endian::native == std::endian::little) {
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    const auto got = static_cast<std::size_t>(is.gcount());
    if (got != count * sizeof(float)) {
      throw FormatError(what + ": truncated payload, expected " +
                        std::to_string(count) + " floats for " +
                        std::to_string(rows) + "x" + std::to_string(cols) +
                        ", found " + std::to_string(got / sizeof(float)));
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t bits = 0;
      if (!get_u32(is, bits)) {
        throw FormatError(what + ": truncated payload, expected " +
                          std::to_string(count) + " floats, found " +
                          std::to_string(i));
      }
      data[i] = std::bit_cast<float>(bits);
    }
  }
  return Matrix(rows, cols, std::move(data));
}

void write_embeddings(const fs::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  write_emb1(out, m);
  if (!out) throw IoError("short write to " + path.string());
}

Matrix load_embeddings(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Matrix m = read_emb1(in, path.string());
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path.string() + ": trailing bytes after payload");
  }
  return m;
}

Matrix load_embeddings(const fs::path& path, std::size_t expected_cols,
                       std::string_view field) {
  Matrix m = load_embeddings(path);
  if (m.cols() != expected_cols) {
    throw FormatError(path.string() + ": " + std::string(field) + " is " +
                      std::to_string(m.cols()) + " but the dataset declares " +
                      std::to_string(expected_cols));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Records

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw FormatError("unknown split \"" + std::string(name) + "\"");
}

const VideoRecord& GroundingDataset::video(std::string_view id) const {
  for (const auto& v : videos) {
    if (v.id == id) return v;
  }
  throw DataError("unknown video id \"" + std::string(id) + "\"");
}

const QueryRecord& GroundingDataset::query(std::string_view id) const {
  for (const auto& q : queries) {
    if (q.id == id) return q;
  }
  throw DataError("unknown query id \"" + std::string(id) + "\"");
}

std::vector<const QueryRecord*> GroundingDataset::queries_for_video(
    std::string_view id) const {
  std::vector<const QueryRecord*> out;
  for (const auto& q : queries) {
    if (q.video_id == id) out.push_back(&q);
  }
  return out;
}

std::vector<const QueryRecord*> GroundingDataset::queries_in(
    Split split) const {
  std::vector<const QueryRecord*> out;
  for (const auto& q : queries) {
    if (q.split == split) out.push_back(&q);
  }
  return out;
}

std::vector<const VideoRecord*> GroundingDataset::videos_in(
    Split split) const {
  std::vector<const VideoRecord*> out;
  for (const auto& v : videos) {
    for (const auto& q : queries) {
      if (q.video_id == v.id && q.split == split) {
        out.push_back(&v);
        break;
      }
    }
  }
  return out;
}

std::vector<Interval> GroundingDataset::moments_for_video(
    std::string_view id) const {
  std::vector<Interval> out;
  for (const auto& q : queries) {
    if (q.video_id == id) out.push_back(q.ground_truth);
  }
  return out;
}

void GroundingDataset::validate() const {
  if (dims.visual == 0 || dims.audio == 0 || dims.text == 0 ||
      dims.text_len == 0) {
    throw DataError("dataset dims must be positive");
  }
  std::map<std::string, const VideoRecord*, std::less<>> by_id;
  for (const auto& v : videos) {
    if (v.id.empty()) throw DataError("video with empty id");
    if (!(v.fps > 0.0) || !std::isfinite(v.fps)) {
      throw DataError("video " + v.id + ": fps must be positive");
    }
    if (!by_id.emplace(v.id, &v).second) {
      throw DataError("duplicate video id " + v.id);
    }
  }
  std::map<std::string, int, std::less<>> query_ids;
  for (const auto& q : queries) {
    if (!query_ids.emplace(q.id, 0).second) {
      throw DataError("duplicate query id " + q.id);
    }
    auto it = by_id.find(q.video_id);
    if (it == by_id.end()) {
      throw DataError("query " + q.id + " references unknown video " +
                      q.video_id);
    }
    const Interval& g = q.ground_truth;
    if (!g.valid() || !(g.end_s > g.start_s)) {
      throw DataError("query " + q.id + ": ground truth must satisfy " +
                      "0 <= start_s < end_s");
    }
    const double duration = it->second->duration_s();
    if (g.end_s > duration + 1e-9) {
      throw DataError("query " + q.id + ": ground truth ends at " +
                      std::to_string(g.end_s) + " s past video duration " +
                      std::to_string(duration) + " s");
    }
  }
}

namespace {

std::size_t require_size(const json& j, const char* key, const char* where) {
  if (!j.contains(key) || !j.at(key).is_number_unsigned()) {
    throw FormatError(std::string(where) + ": missing or invalid \"" + key +
                      "\"");
  }
  return j.at(key).get<std::size_t>();
}

std::string require_string(const json& j, const char* key, const char* where) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw FormatError(std::string(where) + ": missing or invalid \"" + key +
                      "\"");
  }
  return j.at(key).get<std::string>();
}

double require_number(const json& j, const char* key, const char* where) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw FormatError(std::string(where) + ": missing or invalid \"" + key +
                      "\"");
  }
  return j.at(key).get<double>();
}

}  // namespace

std::string serialize_annotations(const GroundingDataset& ds) {
  json doc;
  doc["dims"] = {{"visual", ds.dims.visual},
                 {"audio", ds.dims.audio},
                 {"text", ds.dims.text},
                 {"text_len", ds.dims.text_len}};
  json videos = json::array();
  for (const auto& v : ds.videos) {
    json jv = {{"id", v.id},
               {"fps", v.fps},
               {"num_frames", v.num_frames},
               {"visual", v.visual}};
    jv["audio"] = v.audio ? json(*v.audio) : json(nullptr);
    videos.push_back(std::move(jv));
  }
  json queries = json::array();
  for (const auto& q : ds.queries) {
    queries.push_back({{"id", q.id},
                       {"video_id", q.video_id},
                       {"tokens", q.tokens},
                       {"start_s", q.ground_truth.start_s},
                       {"end_s", q.ground_truth.end_s},
                       {"actionless", q.actionless},
                       {"split", std::string(split_name(q.split))}});
  }
  doc["videos"] = std::move(videos);
  doc["queries"] = std::move(queries);
  return doc.dump(2) + "\n";
}

GroundingDataset parse_annotations(std::string_view json_text,
                                   const fs::path& root) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("annotations: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("annotations: not a JSON object");
  GroundingDataset ds;
  ds.root = root;
  if (!doc.contains("dims") || !doc["dims"].is_object()) {
    throw FormatError("annotations: missing \"dims\"");
  }
  const json& dims = doc["dims"];
  ds.dims.visual = require_size(dims, "visual", "dims");
  ds.dims.audio = require_size(dims, "audio", "dims");
  ds.dims.text = require_size(dims, "text", "dims");
  ds.dims.text_len = dims.contains("text_len")
                         ? require_size(dims, "text_len", "dims")
                         : EmbeddingDims{}.text_len;

  if (!doc.contains("videos") || !doc["videos"].is_array()) {
    throw FormatError("annotations: missing \"videos\" array");
  }
  for (const json& jv : doc["videos"]) {
    VideoRecord v;
    v.id = require_string(jv, "id", "video");
    v.fps = jv.contains("fps") ? require_number(jv, "fps", "video") : 5.0;
    v.num_frames = require_size(jv, "num_frames", "video");
    v.visual = require_string(jv, "visual", "video");
    if (jv.contains("audio") && !jv["audio"].is_null()) {
      v.audio = require_string(jv, "audio", "video");
    }
    ds.videos.push_back(std::move(v));
  }
  if (!doc.contains("queries") || !doc["queries"].is_array()) {
    throw FormatError("annotations: missing \"queries\" array");
  }
  for (const json& jq : doc["queries"]) {
    QueryRecord q;
    q.id = require_string(jq, "id", "query");
    q.video_id = require_string(jq, "video_id", "query");
    q.tokens = require_string(jq, "tokens", "query");
    q.ground_truth = {require_number(jq, "start_s", "query"),
                      require_number(jq, "end_s", "query")};
    if (jq.contains("actionless")) {
      if (!jq["actionless"].is_boolean()) {
        throw FormatError("query " + q.id + ": \"actionless\" must be boolean");
      }
      q.actionless = jq["actionless"].get<bool>();
    }
    q.split = jq.contains("split")
                  ? parse_split(require_string(jq, "split", "query"))
                  : Split::kTrain;
    ds.queries.push_back(std::move(q));
  }
  ds.validate();
  return ds;
}

GroundingDataset load_dataset(const fs::path& root) {
  return parse_annotations(read_text_file(root / "annotations.json"), root);
}

void save_annotations(const GroundingDataset& ds) {
  fs::create_directories(ds.root);
  write_text_file(ds.root / "annotations.json", serialize_annotations(ds));
}

Matrix fit_rows(const Matrix& m, std::size_t rows) {
  if (m.rows() == rows) return m;
  return slice_rows_padded(m, 0, rows);
}

FeatureStore FeatureStore::load(const GroundingDataset& ds, bool need_audio) {
  FeatureStore store;
  for (const auto& v : ds.videos) {
    VideoFeatures f;
    f.visual = load_embeddings(ds.root / v.visual, ds.dims.visual, "D_v");
    if (f.visual.rows() != v.num_frames) {
      throw FormatError(v.visual + ": has " + std::to_string(f.visual.rows()) +
                        " rows but video " + v.id + " declares " +
                        std::to_string(v.num_frames) + " frames");
    }
    if (v.audio) {
      Matrix audio = load_embeddings(ds.root / *v.audio, ds.dims.audio, "D_a");
      if (audio.rows() != v.num_frames) {
        throw FormatError(*v.audio + ": has " + std::to_string(audio.rows()) +
                          " rows but video " + v.id + " declares " +
                          std::to_string(v.num_frames) + " audio steps");
      }
      f.audio = std::move(audio);
    } else if (need_audio) {
      throw DataError("video " + v.id + " has no audio features");
    }
    store.videos_.emplace(v.id, std::move(f));
  }
  for (const auto& q : ds.queries) {
    Matrix tokens = load_embeddings(ds.root / q.tokens, ds.dims.text, "D_t");
    if (tokens.rows() == 0) {
      throw FormatError(q.tokens + ": query " + q.id + " has no tokens");
    }
    store.tokens_.emplace(q.id, fit_rows(tokens, ds.dims.text_len));
  }
  return store;
}

const VideoFeatures& FeatureStore::video(std::string_view id) const {
  auto it = videos_.find(id);
  if (it == videos_.end()) {
    throw DataError("no features loaded for video \"" + std::string(id) + "\"");
  }
  return it->second;
}

const Matrix& FeatureStore::tokens(std::string_view query_id) const {
  auto it = tokens_.find(query_id);
  if (it == tokens_.end()) {
    throw DataError("no tokens loaded for query \"" + std::string(query_id) +
                    "\"");
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// Labels

std::vector<LabeledWindow> label_windows_query_dependent(
    std::string_view video_id, std::span<const Window> windows,
    const Interval& ground_truth, std::string_view query_id) {
  std::vector<LabeledWindow> out;
  out.reserve(windows.size());
  for (const Window& w : windows) {
    out.push_back({std::string(video_id), w, tiou(w.interval, ground_truth) > 0.0,
                   std::string(query_id)});
  }
  return out;
}

std::vector<LabeledWindow> label_windows_query_agnostic(
    std::string_view video_id, std::span<const Window> windows,
    std::span<const Interval> moments) {
  std::vector<LabeledWindow> out;
  out.reserve(windows.size());
  for (const Window& w : windows) {
    const bool positive =
        std::any_of(moments.begin(), moments.end(), [&](const Interval& m) {
          return tiou(w.interval, m) > 0.0;
        });
    out.push_back({std::string(video_id), w, positive, std::nullopt});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Short-form setup

std::vector<ShortformClip> make_shortform_setup(
    const VideoRecord& video, std::span<const Interval> moments,
    double window_len_s) {
  if (!(window_len_s > 0.0) || !std::isfinite(window_len_s)) {
    throw ConfigError("short-form clip length must be positive");
  }
  std::vector<ShortformClip> out;
  const double duration = video.duration_s();
  for (std::size_t k = 0;; ++k) {
    const double start = static_cast<double>(k) * window_len_s;
    if (start >= duration) break;
    const Interval clip{start, std::min(start + window_len_s, duration)};
    double best = 0.0;
    std::optional<std::size_t> best_index;
    for (std::size_t i = 0; i < moments.size(); ++i) {
      const double ov = overlap_length(clip, moments[i]);
      if (ov > best) {
        best = ov;
        best_index = i;
      }
    }
    if (best_index) out.push_back({clip, moments[*best_index]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator

void SyntheticConfig::validate() const {
  if (num_videos == 0 || frames_per_video == 0) {
    throw ConfigError("synthetic: num_videos and frames_per_video must be "
                      "positive");
  }
  if (!(signal_strength >= 0.0) || !(noise_scale > 0.0) ||
      !(query_noise >= 0.0)) {
    throw ConfigError("synthetic: need signal_strength >= 0, noise_scale > 0, "
                      "query_noise >= 0");
  }
  if (min_moment_frames == 0 || min_moment_frames > max_moment_frames) {
    throw ConfigError("synthetic: need 1 <= min_moment_frames <= "
                      "max_moment_frames");
  }
  if (moments_per_video * (max_moment_frames + 1) + 1 > frames_per_video) {
    throw ConfigError("synthetic: " + std::to_string(moments_per_video) +
                      " moments of up to " + std::to_string(max_moment_frames) +
                      " frames do not fit without overlap in " +
                      std::to_string(frames_per_video) + " frames");
  }
  if (dims.visual == 0 || dims.audio == 0 || dims.text == 0 ||
      dims.text_len == 0 || signature_dim == 0) {
    throw ConfigError("synthetic: dims must be positive");
  }
  if (!(fps > 0.0)) throw ConfigError("synthetic: fps must be positive");
  if (train_fraction < 0.0 || val_fraction < 0.0 ||
      train_fraction + val_fraction > 1.0) {
    throw ConfigError("synthetic: split fractions must be non-negative and "
                      "sum to at most 1");
  }
  if (actionless_fraction < 0.0 || actionless_fraction > 1.0) {
    throw ConfigError("synthetic: actionless_fraction must lie in [0, 1]");
  }
}

namespace {

// Unit-variance entries, so every coordinate of P u has unit variance for a
// unit signature and alpha reads as a per-coordinate signal-to-noise ratio.
Matrix mixing_map(std::size_t rows, std::size_t signature_dim, Rng& rng) {
  Matrix p(rows, signature_dim);
  for (float& v : p.values()) v = static_cast<float>(rng.normal());
  return p;
}

std::vector<double> unit_vector(std::size_t dim, Rng& rng) {
  std::vector<double> u(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    norm = 0.0;
    for (double& x : u) {
      x = rng.normal();
      norm += x * x;
    }
  }
  norm = std::sqrt(norm);
  for (double& x : u) x /= norm;
  return u;
}

std::vector<double> apply_map(const Matrix& p, const std::vector<double>& u) {
  std::vector<double> out(p.rows(), 0.0);
  for (std::size_t r = 0; r < p.rows(); ++r) {
    for (std::size_t c = 0; c < p.cols(); ++c) out[r] += p(r, c) * u[c];
  }
  return out;
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev,
                       Rng& rng) {
  Matrix m(rows, cols);
  for (float& v : m.values()) v = static_cast<float>(rng.normal(0.0, stddev));
  return m;
}

// Non-overlapping [start, end) frame ranges, separated by at least one
// frame, ordered by start.
std::vector<std::pair<std::size_t, std::size_t>> place_moments(
    const SyntheticConfig& cfg, Rng& rng) {
  const std::size_t k = cfg.moments_per_video;
  std::vector<std::size_t> lengths(k);
  std::size_t total = 0;
  for (auto& len : lengths) {
    len = cfg.min_moment_frames +
          rng.below(cfg.max_moment_frames - cfg.min_moment_frames + 1);
    total += len;
  }
  // k + 1 gaps; the inner ones get at least one frame.
  const std::size_t reserved = k > 0 ? k - 1 : 0;
  const std::size_t free_frames = cfg.frames_per_video - total - reserved;
  std::vector<double> weights(k + 1);
  double weight_sum = 0.0;
  for (double& w : weights) {
    w = rng.uniform() + 1e-9;
    weight_sum += w;
  }
  std::vector<std::size_t> gaps(k + 1);
  std::size_t used = 0;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    gaps[i] = static_cast<std::size_t>(std::floor(
        weights[i] / weight_sum * static_cast<double>(free_frames)));
    used += gaps[i];
  }
  gaps.back() += free_frames - used;

  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < k; ++i) {
    cursor += gaps[i] + (i > 0 ? 1 : 0);
    out.emplace_back(cursor, cursor + lengths[i]);
    cursor += lengths[i];
  }
  return out;
}

std::string pad_index(std::size_t i, int width) {
  std::string s = std::to_string(i);
  if (static_cast<int>(s.size()) < width) {
    s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  }
  return s;
}

}  // namespace

GroundingDataset generate_synthetic(const SyntheticConfig& cfg,
                                    const fs::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out_dir / "features", ec);
  if (ec) {
    throw IoError("cannot create " + (out_dir / "features").string() + ": " +
                  ec.message());
  }

  GroundingDataset ds;
  ds.root = out_dir;
  ds.dims = cfg.dims;

  Rng map_rng(derive_seed(cfg.seed, {1}));
  const Matrix p_visual = mixing_map(cfg.dims.visual, cfg.signature_dim, map_rng);
  const Matrix p_audio = mixing_map(cfg.dims.audio, cfg.signature_dim, map_rng);
  // Text shares the visual space when the widths agree, as in a joint
  // image-text embedding.
  const Matrix p_text = cfg.dims.text == cfg.dims.visual
                            ? p_visual
                            : mixing_map(cfg.dims.text, cfg.signature_dim,
                                         map_rng);

  const auto n_train = static_cast<std::size_t>(
      std::floor(cfg.train_fraction * static_cast<double>(cfg.num_videos)));
  const auto n_val = static_cast<std::size_t>(
      std::floor(cfg.val_fraction * static_cast<double>(cfg.num_videos)));

  for (std::size_t vi = 0; vi < cfg.num_videos; ++vi) {
    Rng rng(derive_seed(cfg.seed, {2, vi}));
    const std::string vid = "v" + pad_index(vi, 3);
    const Split split = vi < n_train           ? Split::kTrain
                        : vi < n_train + n_val ? Split::kVal
                                               : Split::kTest;

    Matrix visual = gaussian_matrix(cfg.frames_per_video, cfg.dims.visual,
                                    cfg.noise_scale, rng);
    Matrix audio;
    if (cfg.with_audio) {
      audio = gaussian_matrix(cfg.frames_per_video, cfg.dims.audio,
                              cfg.noise_scale, rng);
    }

    const auto moments = place_moments(cfg, rng);
    for (std::size_t mi = 0; mi < moments.size(); ++mi) {
      const auto [start, end] = moments[mi];
      const std::vector<double> u = unit_vector(cfg.signature_dim, rng);
      const std::vector<double> sv = apply_map(p_visual, u);
      const std::vector<double> sa = apply_map(p_audio, u);
      for (std::size_t f = start; f < end; ++f) {
        auto vrow = visual.row(f);
        for (std::size_t c = 0; c < vrow.size(); ++c) {
          vrow[c] += static_cast<float>(cfg.signal_strength * sv[c]);
        }
        if (cfg.with_audio) {
          auto arow = audio.row(f);
          for (std::size_t c = 0; c < arow.size(); ++c) {
            arow[c] += static_cast<float>(cfg.signal_strength * sa[c]);
          }
        }
      }

      const std::vector<double> st = apply_map(p_text, u);
      Matrix tokens(cfg.dims.text_len, cfg.dims.text);
      for (std::size_t r = 0; r < tokens.rows(); ++r) {
        for (std::size_t c = 0; c < tokens.cols(); ++c) {
          tokens(r, c) = static_cast<float>(st[c] + rng.normal(0.0, cfg.query_noise));
        }
      }

      QueryRecord q;
      q.id = vid + "_q" + std::to_string(mi);
      q.video_id = vid;
      q.tokens = "features/" + q.id + ".text.emb";
      q.ground_truth = {static_cast<double>(start) / cfg.fps,
                        static_cast<double>(end) / cfg.fps};
      q.actionless = rng.uniform() < cfg.actionless_fraction;
      q.split = split;
      write_embeddings(out_dir / q.tokens, tokens);
      ds.queries.push_back(std::move(q));
    }

    VideoRecord v;
    v.id = vid;
    v.fps = cfg.fps;
    v.num_frames = cfg.frames_per_video;
    v.visual = "features/" + vid + ".visual.emb";
    write_embeddings(out_dir / v.visual, visual);
    if (cfg.with_audio) {
      v.audio = "features/" + vid + ".audio.emb";
      write_embeddings(out_dir / *v.audio, audio);
    }
    ds.videos.push_back(std::move(v));
  }

  ds.validate();
  save_annotations(ds);
  return ds;
}

}  // namespace guided
