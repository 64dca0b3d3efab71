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

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "guided/errors.hpp"
#include "guided/rng.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace guided {
namespace {

VideoRecord video_of(std::size_t frames) {
  return {.id = "v", .fps = 5.0, .num_frames = frames, .visual = "x"};
}

std::vector<ScoredMoment> random_predictions(Rng& rng, double duration,
                                             std::size_t n) {
  std::vector<ScoredMoment> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double start = rng.uniform(0.0, duration - 1.0);
    const double end = std::min(duration, start + rng.uniform(0.5, 20.0));
    out.push_back({{start, end}, rng.uniform(), rng.below(8)});
  }
  return out;
}

GuidanceScores scores_for(const std::vector<double>& p) {
  return {.video_id = "v", .query_id = std::nullopt, .scores = p};
}

TEST(FuseScoresTest, SingleMomentProduct) {
  const auto windows = guidance_windows(video_of(256), 64, 32);
  std::vector<double> p(windows.size(), 0.1);
  p[3] = 0.8;
  const std::vector<ScoredMoment> preds{{windows[3].interval, 0.5, std::nullopt}};
  const auto fused = fuse_scores(preds, scores_for(p), windows);
  ASSERT_EQ(fused.size(), 1u);
  EXPECT_NEAR(fused[0].score, 0.4, 1e-12);
  EXPECT_EQ(fused[0].interval, preds[0].interval);
}

TEST(FuseScoresTest, UnitGuidanceIsIdentity) {
  Rng rng(1);
  const VideoRecord v = video_of(400);
  const auto windows = guidance_windows(v, 64, 32);
  const auto preds = random_predictions(rng, v.duration_s(), 30);
  const auto fused =
      fuse_scores(preds, scores_for(std::vector<double>(windows.size(), 1.0)),
                  windows);
  EXPECT_EQ(fused, preds);
}

TEST(FuseScoresTest, MatchesBruteForce) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const VideoRecord v = video_of(64 + rng.below(600));
    const auto windows = guidance_windows(v, 64, 32);
    std::vector<double> p(windows.size());
    for (double& x : p) x = rng.uniform();
    const auto preds = random_predictions(rng, v.duration_s(), rng.below(30));
    const auto fused = fuse_scores(preds, scores_for(p), windows);
    const auto want = oracle::brute_force_fuse(preds, p, windows);
    ASSERT_EQ(fused.size(), want.size());
    for (std::size_t i = 0; i < fused.size(); ++i) {
      ASSERT_EQ(fused[i].score, want[i].score) << "trial " << trial;
      ASSERT_EQ(fused[i].interval, want[i].interval);
    }
  }
}

TEST(FuseScoresTest, ConstantGuidancePreservesRanking) {
  Rng rng(3);
  const VideoRecord v = video_of(300);
  const auto windows = guidance_windows(v, 64, 32);
  for (double c : {0.2, 0.5, 1.0}) {
    const auto preds = random_predictions(rng, v.duration_s(), 25);
    const auto fused = fuse_scores(
        preds, scores_for(std::vector<double>(windows.size(), c)), windows);
    EXPECT_EQ(ranking_order(fused), ranking_order(preds));
  }
}

TEST(FuseScoresTest, GuidanceCanReverseOrder) {
  const auto windows = guidance_windows(video_of(256), 64, 32);
  std::vector<double> p(windows.size(), 0.5);
  p[1] = 0.1;
  p[5] = 0.9;
  const std::vector<ScoredMoment> preds{{windows[1].interval, 0.9, std::nullopt},
                                        {windows[5].interval, 0.5, std::nullopt}};
  const auto ranked = rerank_and_nms(fuse_scores(preds, scores_for(p), windows), 0.3);
  ASSERT_EQ(ranked.size(), 2u);
  EXPECT_EQ(ranked[0].interval, windows[5].interval);
  EXPECT_NEAR(ranked[0].score, 0.45, 1e-12);
  EXPECT_NEAR(ranked[1].score, 0.09, 1e-12);
}

TEST(FuseScoresTest, ScalingGuidanceKeepsRanking) {
  Rng rng(4);
  const VideoRecord v = video_of(500);
  const auto windows = guidance_windows(v, 64, 32);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(windows.size());
    for (double& x : p) x = rng.uniform(0.05, 0.5);
    std::vector<double> scaled = p;
    const double c = rng.uniform(1.1, 2.0);
    for (double& x : scaled) x *= c;
    const auto preds = random_predictions(rng, v.duration_s(), 20);
    const auto a = rerank_and_nms(fuse_scores(preds, scores_for(p), windows), 0.3);
    const auto b = rerank_and_nms(fuse_scores(preds, scores_for(scaled), windows), 0.3);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].interval, b[i].interval);
    }
  }
}

TEST(FuseScoresTest, PerfectGuidanceNeverLowersGroundTruthRank) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const VideoRecord v = video_of(600);
    const auto windows = guidance_windows(v, 64, 32);
    auto preds = random_predictions(rng, v.duration_s(), 20);
    // The ground-truth prediction sits exactly on one window.
    const std::size_t gt_window = rng.below(windows.size() - 2);
    const Interval gt = windows[gt_window].interval;
    preds.push_back({gt, rng.uniform(), std::nullopt});
    std::vector<double> p(windows.size(), 0.0);
    p[gt_window] = 1.0;
    const auto position_of_gt = [&](const std::vector<ScoredMoment>& m) {
      const auto order = ranking_order(m);
      for (std::size_t r = 0; r < order.size(); ++r) {
        if (m[order[r]].interval == gt) return r;
      }
      return order.size();
    };
    const auto fused = fuse_scores(preds, scores_for(p), windows);
    EXPECT_LE(position_of_gt(fused), position_of_gt(preds)) << trial;
  }
}

TEST(FuseScoresTest, ScoreCountMismatchIsDataError) {
  const auto windows = guidance_windows(video_of(256), 64, 32);
  const std::vector<ScoredMoment> preds{{{0, 1}, 0.5, std::nullopt}};
  EXPECT_THROW(fuse_scores(preds, scores_for({0.5, 0.5}), windows), DataError);
}

TEST(FuseScoresTest, NonFiniteScoreIsNumericError) {
  const std::vector<ScoredMoment> fused{
      {{0, 1}, std::numeric_limits<double>::quiet_NaN(), std::nullopt}};
  EXPECT_THROW(rerank_and_nms(fused, 0.3), NumericError);
}

TEST(GuidanceWindowsTest, ClippedToDuration) {
  const auto windows = guidance_windows(video_of(100), 64);
  ASSERT_EQ(windows.size(), 4u);
  EXPECT_EQ(windows[0].interval, (Interval{0.0, 12.8}));
  for (const auto& w : windows) EXPECT_LE(w.interval.end_s, 20.0);
  EXPECT_EQ(windows[3].interval.end_s, 20.0);
}

TEST(GuidanceFileTest, RoundTripAndLookup) {
  GuidanceFile file;
  file.window_frames = 64;
  file.stride_frames = 32;
  file.records = {{"v1", std::nullopt, {0.25, 0.5}},
                  {"v1", std::string("q7"), {0.75, 1.0}},
                  {"v2", std::nullopt, {0.0}}};
  const auto back = parse_guidance(serialize_guidance(file));
  EXPECT_EQ(back, file);
  EXPECT_EQ(back.lookup("v1", "q7").scores[0], 0.75);
  EXPECT_EQ(back.lookup("v1", "q1").scores[0], 0.25);
  EXPECT_THROW(back.lookup("v3", "q1"), DataError);

  testing::TempDir dir("guidance_file");
  save_guidance(dir / "guidance.json", file);
  EXPECT_EQ(load_guidance(dir / "guidance.json"), file);
}

TEST(GuidanceFileTest, MalformedInputIsRejected) {
  EXPECT_THROW(parse_guidance("[1, 2"), FormatError);
  EXPECT_THROW(parse_guidance(R"({"window_frames": 64})"), FormatError);
  GuidanceFile file;
  file.records = {{"v1", std::nullopt, {1.5}}};
  EXPECT_THROW(parse_guidance(serialize_guidance(file)), DataError);
}

}  // namespace
}  // namespace guided
