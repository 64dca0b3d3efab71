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

#include "guided/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <iostream>

#include "guided/errors.hpp"
#include "guided/parallel.hpp"
#include "json.hpp"

namespace guided {

std::vector<Window> guidance_windows(const VideoRecord& video,
                                     const GuidanceConfig& config,
                                     std::size_t stride_frames) {
  return guidance_windows(video, config.window_frames, stride_frames);
}

std::vector<LabeledWindow> guidance_labels(const GroundingDataset& ds,
                                           Split split,
                                           const GuidanceConfig& config,
                                           std::size_t stride_frames) {
  std::vector<LabeledWindow> out;
  if (config.mode == GuidanceMode::kQueryAgnostic) {
    for (const VideoRecord* v : ds.videos_in(split)) {
      const auto windows = guidance_windows(*v, config, stride_frames);
      const auto moments = ds.moments_for_video(v->id);
      auto labels = label_windows_query_agnostic(v->id, windows, moments);
      out.insert(out.end(), labels.begin(), labels.end());
    }
  } else {
    for (const QueryRecord* q : ds.queries_in(split)) {
      const auto windows = guidance_windows(ds.video(q->video_id), config,
                                            stride_frames);
      auto labels = label_windows_query_dependent(q->video_id, windows,
                                                  q->ground_truth, q->id);
      out.insert(out.end(), labels.begin(), labels.end());
    }
  }
  return out;
}

TrainResult train_stage(const RunConfig& cfg, const GroundingDataset& ds,
                        const FeatureStore& features) {
  const GuidanceConfig gcfg = cfg.guidance_for(ds.dims);
  const auto train_labels =
      guidance_labels(ds, Split::kTrain, gcfg, cfg.train.window_stride);
  const auto val_labels = guidance_labels(ds, Split::kVal, gcfg);
  const auto train = make_samples(train_labels, features, gcfg);
  const auto val = make_samples(val_labels, features, gcfg);
  return train_guidance(train, gcfg, cfg.train_for(), val);
}

namespace {

// Scores one video's guidance windows for an optional query.
std::vector<double> score_one(const GuidanceModel& model,
                              const VideoRecord& video,
                              const VideoFeatures& features,
                              const Matrix* tokens, ScoringStats* stats) {
  const auto windows = guidance_windows(video, model.config());
  const auto scored = score_windows(model, features, tokens, windows, 1, stats);
  std::vector<double> p;
  p.reserve(scored.size());
  for (const WindowScore& s : scored) p.push_back(s.probability);
  return p;
}

}  // namespace

GuidanceFile score_stage(const RunConfig& cfg, const GroundingDataset& ds,
                         const FeatureStore& features,
                         const GuidanceModel& model, ScoringStats* stats) {
  const GuidanceConfig& gcfg = model.config();
  if (gcfg.mode != cfg.mode) {
    throw ConfigError("model mode " + std::string(mode_name(gcfg.mode)) +
                      " does not match the run mode " +
                      std::string(mode_name(cfg.mode)));
  }
  GuidanceFile file;
  file.window_frames = gcfg.window_frames;
  file.stride_frames = std::max<std::size_t>(gcfg.window_frames / 2, 1);
  if (gcfg.mode == GuidanceMode::kQueryAgnostic) {
    const auto videos = ds.videos_in(cfg.split);
    file.records.resize(videos.size());
    parallel_for(videos.size(), cfg.threads, [&](std::size_t i) {
      const VideoRecord& v = *videos[i];
      file.records[i] = {v.id, std::nullopt,
                         score_one(model, v, features.video(v.id), nullptr,
                                   stats)};
    });
  } else {
    const auto queries = ds.queries_in(cfg.split);
    file.records.resize(queries.size());
    parallel_for(queries.size(), cfg.threads, [&](std::size_t i) {
      const QueryRecord& q = *queries[i];
      const VideoRecord& v = ds.video(q.video_id);
      file.records[i] = {v.id, q.id,
                         score_one(model, v, features.video(v.id),
                                   &features.tokens(q.id), stats)};
    });
  }
  return file;
}

double guidance_auroc(const GroundingDataset& ds, Split split,
                      const GuidanceConfig& config, const GuidanceFile& scores) {
  std::vector<bool> labels;
  std::vector<double> values;
  for (const LabeledWindow& lw : guidance_labels(ds, split, config)) {
    const GuidanceScores& g =
        scores.lookup(lw.video_id, lw.query_id.value_or(std::string()));
    if (lw.window.index >= g.scores.size()) {
      throw DataError("guidance scores for video " + lw.video_id +
                      " do not cover window " + std::to_string(lw.window.index));
    }
    labels.push_back(lw.label);
    values.push_back(g.scores[lw.window.index]);
  }
  return auroc(labels, values);
}

std::unique_ptr<GroundingScorer> make_scorer(const RunConfig& cfg) {
  if (cfg.grounder.kind == GrounderKind::kSimilarity) {
    return std::make_unique<SimilarityScorer>();
  }
  NoisyOracleConfig oc = cfg.grounder.oracle;
  oc.seed = cfg.seed;
  return std::make_unique<NoisyOracleScorer>(oc);
}

std::vector<QueryPredictions> ground_stage(const RunConfig& cfg,
                                           const GroundingDataset& ds,
                                           const FeatureStore& features,
                                           const GroundingScorer& scorer) {
  const auto queries = ds.queries_in(cfg.split);
  std::vector<QueryPredictions> out(queries.size());
  parallel_for(queries.size(), cfg.threads, [&](std::size_t i) {
    const QueryRecord& q = *queries[i];
    const VideoRecord& v = ds.video(q.video_id);
    const Interval gt[] = {q.ground_truth};
    out[i] = {q.id, run_longform(scorer, v, features.video(v.id).visual,
                                 &features.tokens(q.id), gt,
                                 derive_seed(cfg.seed, {hash_string(q.id)}),
                                 cfg.longform)};
  });
  return out;
}

std::vector<QueryPredictions> fuse_stage(
    const RunConfig& cfg, const GroundingDataset& ds,
    std::span<const QueryPredictions> predictions,
    const GuidanceFile* guidance) {
  std::vector<QueryPredictions> out(predictions.size());
  parallel_for(predictions.size(), cfg.threads, [&](std::size_t i) {
    const QueryPredictions& qp = predictions[i];
    std::vector<ScoredMoment> fused = qp.moments;
    if (guidance) {
      const QueryRecord& q = ds.query(qp.query_id);
      const VideoRecord& v = ds.video(q.video_id);
      const auto windows =
          guidance_windows(v, guidance->window_frames, guidance->stride_frames);
      fused = fuse_scores(qp.moments, guidance->lookup(v.id, q.id), windows);
    }
    out[i] = {qp.query_id, rerank_and_nms(fused, cfg.eval.nms_threshold)};
  });
  return out;
}

// ---------------------------------------------------------------------------
// Cost

CostReport expected_cost(const GroundingDataset& ds,
                         const GuidanceConfig& config,
                         const LongformConfig& longform) {
  CostReport r;
  r.mode = config.mode;
  r.videos = ds.videos.size();
  r.queries = ds.queries.size();
  for (const VideoRecord& v : ds.videos) {
    r.guidance_windows_per_video[v.id] = guidance_windows(v, config).size();
    r.grounding_windows_per_video[v.id] = longform_windows(v, longform).size();
  }
  if (config.mode == GuidanceMode::kQueryAgnostic) {
    for (const auto& [id, n] : r.guidance_windows_per_video) {
      r.guidance_passes += n;
    }
  } else {
    for (const QueryRecord& q : ds.queries) {
      r.guidance_passes += r.guidance_windows_per_video.at(q.video_id);
    }
  }
  for (const QueryRecord& q : ds.queries) {
    r.grounding_passes += r.grounding_windows_per_video.at(q.video_id);
  }
  return r;
}

namespace {

class CountingScorer final : public GroundingScorer {
 public:
  explicit CountingScorer(const GroundingScorer& inner) : inner_(inner) {}
  std::vector<ScoredMoment> score(const WindowContext& ctx,
                                  std::size_t max_proposals) const override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_.score(ctx, max_proposals);
  }
  std::string name() const override { return inner_.name(); }
  std::uint64_t calls() const { return calls_.load(); }

 private:
  const GroundingScorer& inner_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

CostReport bench_cost(const RunConfig& cfg, const GroundingDataset& ds,
                      const FeatureStore& features, const GuidanceModel& model) {
  const GuidanceConfig& gcfg = model.config();
  CostReport r = expected_cost(ds, gcfg, cfg.longform);

  ScoringStats stats;
  auto t0 = std::chrono::steady_clock::now();
  if (gcfg.mode == GuidanceMode::kQueryAgnostic) {
    parallel_for(ds.videos.size(), cfg.threads, [&](std::size_t i) {
      const VideoRecord& v = ds.videos[i];
      score_one(model, v, features.video(v.id), nullptr, &stats);
    });
  } else {
    parallel_for(ds.queries.size(), cfg.threads, [&](std::size_t i) {
      const QueryRecord& q = ds.queries[i];
      const VideoRecord& v = ds.video(q.video_id);
      score_one(model, v, features.video(v.id), &features.tokens(q.id), &stats);
    });
  }
  r.guidance_seconds = seconds_since(t0);
  r.measured_guidance_passes = stats.forward_passes.load();

  const auto inner = make_scorer(cfg);
  CountingScorer counter(*inner);
  t0 = std::chrono::steady_clock::now();
  parallel_for(ds.queries.size(), cfg.threads, [&](std::size_t i) {
    const QueryRecord& q = ds.queries[i];
    const VideoRecord& v = ds.video(q.video_id);
    const Interval gt[] = {q.ground_truth};
    run_longform(counter, v, features.video(v.id).visual,
                 &features.tokens(q.id), gt,
                 derive_seed(cfg.seed, {hash_string(q.id)}), cfg.longform);
  });
  r.grounding_seconds = seconds_since(t0);
  r.measured_grounding_passes = counter.calls();
  return r;
}

std::string cost_to_json(const CostReport& r) {
  const auto seconds = [](double s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", s);
    return nlohmann::json::parse(buf);
  };
  nlohmann::ordered_json doc;
  doc["mode"] = std::string(mode_name(r.mode));
  doc["videos"] = r.videos;
  doc["queries"] = r.queries;
  doc["guidance_forward_passes"] = r.guidance_passes;
  doc["grounding_forward_passes"] = r.grounding_passes;
  doc["measured_guidance_forward_passes"] = r.measured_guidance_passes;
  doc["measured_grounding_forward_passes"] = r.measured_grounding_passes;
  doc["counts_match"] = r.counts_match();
  doc["wall_clock_s"] = {{"guidance", seconds(r.guidance_seconds)},
                         {"grounding", seconds(r.grounding_seconds)}};
  doc["guidance_windows_per_video"] = r.guidance_windows_per_video;
  doc["grounding_windows_per_video"] = r.grounding_windows_per_video;
  return doc.dump(2) + "\n";
}

}  // namespace guided
