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

#include "guided/grounding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "guided/errors.hpp"
#include "json.hpp"

namespace guided {

namespace {

std::vector<ScoredMoment> top_by_rank(const std::vector<ScoredMoment>& moments,
                                      std::size_t limit) {
  std::vector<ScoredMoment> out;
  for (std::size_t i : ranking_order(moments)) {
    if (out.size() == limit) break;
    out.push_back(moments[i]);
  }
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::vector<ScoredMoment> similarity_ground(const Matrix& frames,
                                            const Matrix& tokens, double fps,
                                            std::size_t max_proposals) {
  if (frames.cols() != tokens.cols()) {
    throw DimensionError("similarity grounding needs D_v == D_t, got " +
                         std::to_string(frames.cols()) + " and " +
                         std::to_string(tokens.cols()));
  }
  if (frames.rows() == 0 || tokens.rows() == 0 || max_proposals == 0) return {};
  const std::size_t d = frames.cols();

  std::vector<double> query(d, 0.0);
  for (std::size_t r = 0; r < tokens.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) query[c] += tokens(r, c);
  }
  double qnorm = 0.0;
  for (double v : query) qnorm += v * v;
  qnorm = std::sqrt(qnorm);

  const std::size_t n = frames.rows();
  std::vector<double> sim(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double dot = 0.0;
    double fnorm = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dot += query[c] * frames(r, c);
      fnorm += static_cast<double>(frames(r, c)) * frames(r, c);
    }
    const double denom = qnorm * std::sqrt(fnorm);
    sim[r] = denom > 0.0 ? std::clamp(dot / denom, -1.0, 1.0) : 0.0;
  }

  std::vector<double> sorted = sim;
  std::sort(sorted.begin(), sorted.end());
  const double threshold = quantile_sorted(sorted, 0.75);
  std::vector<char> above(n);
  bool any = false;
  for (std::size_t r = 0; r < n; ++r) {
    above[r] = sim[r] > threshold;
    any = any || above[r];
  }
  // Flat similarity profiles leave nothing strictly above the quantile.
  if (!any) {
    for (std::size_t r = 0; r < n; ++r) above[r] = sim[r] >= threshold;
  }

  std::vector<ScoredMoment> runs;
  for (std::size_t r = 0; r < n;) {
    if (!above[r]) {
      ++r;
      continue;
    }
    std::size_t end = r;
    double total = 0.0;
    while (end < n && above[end]) total += sim[end++];
    const double mean = total / static_cast<double>(end - r);
    runs.push_back({Interval{static_cast<double>(r) / fps,
                             static_cast<double>(end) / fps},
                    std::clamp((mean + 1.0) / 2.0, 0.0, 1.0),
                    std::nullopt});
    r = end;
  }
  return top_by_rank(runs, max_proposals);
}

std::vector<ScoredMoment> SimilarityScorer::score(
    const WindowContext& ctx, std::size_t max_proposals) const {
  if (ctx.tokens == nullptr) {
    throw UsageError("similarity grounding needs query tokens");
  }
  std::vector<ScoredMoment> out =
      similarity_ground(ctx.frames, *ctx.tokens, ctx.fps, max_proposals);
  for (auto& m : out) m.interval.end_s = std::min(m.interval.end_s, ctx.length_s);
  return out;
}

void NoisyOracleConfig::validate() const {
  if (!(jitter_s >= 0.0) || !std::isfinite(jitter_s) || !(score_noise >= 0.0) ||
      !std::isfinite(score_noise)) {
    throw ConfigError("noisy oracle jitter_s and score_noise must be finite "
                      "and non-negative");
  }
}

std::vector<ScoredMoment> noisy_oracle_ground(
    std::span<const Interval> ground_truth, double window_length_s,
    const NoisyOracleConfig& cfg, Rng& rng, std::size_t max_proposals) {
  cfg.validate();
  std::vector<ScoredMoment> out;
  const auto clamp_t = [&](double t) {
    return std::clamp(t, 0.0, window_length_s);
  };
  for (const Interval& g : ground_truth) {
    double s = clamp_t(g.start_s + rng.normal(0.0, cfg.jitter_s));
    double e = clamp_t(g.end_s + rng.normal(0.0, cfg.jitter_s));
    if (e < s) std::swap(s, e);
    const double score = std::clamp(0.9 + rng.normal(0.0, cfg.score_noise), 0.0, 1.0);
    out.push_back({Interval{s, e}, score, std::nullopt});
  }
  for (std::size_t i = 0; i < cfg.distractors; ++i) {
    double s = rng.uniform(0.0, window_length_s);
    double e = rng.uniform(0.0, window_length_s);
    if (e < s) std::swap(s, e);
    out.push_back({Interval{s, e}, rng.uniform(0.4, 0.8), std::nullopt});
  }
  return top_by_rank(out, max_proposals);
}

NoisyOracleScorer::NoisyOracleScorer(NoisyOracleConfig cfg) : cfg_(cfg) {
  cfg_.validate();
}

std::vector<ScoredMoment> NoisyOracleScorer::score(
    const WindowContext& ctx, std::size_t max_proposals) const {
  Rng rng(derive_seed(cfg_.seed, {ctx.seed}));
  return noisy_oracle_ground(ctx.ground_truth, ctx.length_s, cfg_, rng,
                             max_proposals);
}

void LongformConfig::validate() const {
  if (window_frames == 0 || proposals == 0) {
    throw ConfigError("longform window_frames and proposals must be positive");
  }
  if (effective_stride() > window_frames) {
    throw ConfigError("longform stride_frames must not exceed window_frames");
  }
}

std::vector<Window> longform_windows(const VideoRecord& video,
                                     const LongformConfig& cfg) {
  cfg.validate();
  std::vector<Window> windows = generate_windows(
      video.num_frames, video.fps, cfg.window_frames, cfg.effective_stride());
  // A video no longer than one window is covered by that window alone.
  if (video.num_frames <= cfg.window_frames && windows.size() > 1) {
    windows.resize(1);
  }
  const double duration = video.duration_s();
  for (Window& w : windows) {
    w.interval.end_s = std::min(w.interval.end_s, duration);
  }
  return windows;
}

std::vector<ScoredMoment> run_longform(const GroundingScorer& scorer,
                                       const VideoRecord& video,
                                       const Matrix& visual,
                                       const Matrix* tokens,
                                       std::span<const Interval> ground_truth,
                                       std::uint64_t query_seed,
                                       const LongformConfig& cfg) {
  if (visual.rows() != video.num_frames) {
    throw DataError("video " + video.id + " has " +
                    std::to_string(visual.rows()) + " feature rows, expected " +
                    std::to_string(video.num_frames));
  }
  std::vector<ScoredMoment> out;
  for (const Window& w : longform_windows(video, cfg)) {
    WindowContext ctx;
    ctx.window_index = w.index;
    ctx.fps = video.fps;
    ctx.length_s = w.interval.length();
    const std::size_t valid =
        std::min(w.frame_len, video.num_frames - w.frame_start);
    ctx.frames = slice_rows_padded(visual, w.frame_start, valid);
    ctx.tokens = tokens;
    for (const Interval& g : ground_truth) {
      if (overlap_length(g, w.interval) <= 0.0) continue;
      ctx.ground_truth.push_back(
          {std::max(g.start_s, w.interval.start_s) - w.interval.start_s,
           std::min(g.end_s, w.interval.end_s) - w.interval.start_s});
    }
    ctx.seed = derive_seed(query_seed, {w.index});

    std::vector<ScoredMoment> local;
    try {
      local = scorer.score(ctx, cfg.proposals);
    } catch (const Error& e) {
      throw Error(e.kind(), "video " + video.id + " window " +
                                std::to_string(w.index) + ": " + e.what());
    }
    if (local.size() > cfg.proposals) {
      throw DataError(scorer.name() + " returned " +
                      std::to_string(local.size()) + " proposals for window " +
                      std::to_string(w.index) + " of video " + video.id);
    }
    const double slack = 1e-9 * std::max(1.0, ctx.length_s);
    for (ScoredMoment m : local) {
      if (!(m.score >= 0.0 && m.score <= 1.0) || !m.interval.valid() ||
          m.interval.end_s > ctx.length_s + slack) {
        throw DataError(scorer.name() + " produced an invalid proposal in "
                        "window " + std::to_string(w.index) + " of video " +
                        video.id);
      }
      m.interval.start_s += w.interval.start_s;
      m.interval.end_s += w.interval.start_s;
      // Shifting can round a boundary a hair past the window edge.
      m.interval.start_s = std::max(m.interval.start_s, w.interval.start_s);
      m.interval.end_s = std::min(m.interval.end_s, w.interval.end_s);
      m.source_window = w.index;
      out.push_back(m);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Predictions I/O

void write_predictions(std::ostream& os,
                       std::span<const QueryPredictions> predictions) {
  for (const QueryPredictions& q : predictions) {
    for (const ScoredMoment& m : q.moments) {
      nlohmann::ordered_json line;
      line["query_id"] = q.query_id;
      line["start_s"] = m.interval.start_s;
      line["end_s"] = m.interval.end_s;
      line["score"] = m.score;
      if (m.source_window) {
        line["source_window"] = *m.source_window;
      } else {
        line["source_window"] = nullptr;
      }
      os << line.dump() << '\n';
    }
  }
}

void save_predictions(const std::filesystem::path& path,
                      std::span<const QueryPredictions> predictions) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  write_predictions(out, predictions);
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<QueryPredictions> read_predictions(std::istream& is,
                                               std::string_view what) {
  std::vector<QueryPredictions> out;
  std::map<std::string, std::size_t, std::less<>> slot;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where =
        std::string(what) + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    ScoredMoment m;
    std::string qid;
    try {
      qid = j.at("query_id").get<std::string>();
      m.interval.start_s = j.at("start_s").get<double>();
      m.interval.end_s = j.at("end_s").get<double>();
      m.score = j.at("score").get<double>();
      if (j.contains("source_window") && !j["source_window"].is_null()) {
        m.source_window = j["source_window"].get<std::size_t>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (!(m.score >= 0.0 && m.score <= 1.0)) {
      throw DataError(where + ": score " + std::to_string(m.score) +
                      " is outside [0, 1]");
    }
    if (!m.interval.valid()) {
      throw DataError(where + ": invalid interval");
    }
    auto [it, inserted] = slot.try_emplace(qid, out.size());
    if (inserted) out.push_back({qid, {}});
    out[it->second].moments.push_back(m);
  }
  return out;
}

std::vector<QueryPredictions> load_predictions(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_predictions(in, path.string());
}

}  // namespace guided
