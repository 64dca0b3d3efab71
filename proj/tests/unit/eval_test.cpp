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

#include "guided/eval.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "guided/errors.hpp"
#include "guided/rng.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace guided {
namespace {

using RankedLists = std::vector<std::vector<ScoredMoment>>;

ScoredMoment at(Interval i, double score = 0.5) {
  return {i, score, std::nullopt};
}

// One test video with `gts.size()` queries; predictions are keyed "q{i}".
GroundingDataset dataset_with(const std::vector<Interval>& gts,
                              const std::vector<bool>& actionless = {}) {
  GroundingDataset ds;
  ds.videos.push_back({.id = "v0", .fps = 5.0, .num_frames = 1000, .visual = "v0.emb"});
  for (std::size_t i = 0; i < gts.size(); ++i) {
    QueryRecord q;
    q.id = "q" + std::to_string(i);
    q.video_id = "v0";
    q.tokens = q.id + ".emb";
    q.ground_truth = gts[i];
    q.actionless = i < actionless.size() && actionless[i];
    q.split = Split::kTest;
    ds.queries.push_back(q);
  }
  return ds;
}

std::vector<QueryPredictions> keyed(const RankedLists& lists) {
  std::vector<QueryPredictions> out;
  for (std::size_t i = 0; i < lists.size(); ++i) {
    out.push_back({"q" + std::to_string(i), lists[i]});
  }
  return out;
}

TEST(RecallTest, PerfectRankOneHitsEverywhere) {
  const std::vector<Interval> gt{{1, 4}, {10, 12}};
  const RankedLists ranked{{at(gt[0]), at({50, 60})}, {at(gt[1])}};
  for (double theta : {0.1, 0.3, 0.5, 1.0}) {
    EXPECT_EQ(recall_at_k(ranked, gt, 1, theta), 100.0);
  }
}

TEST(RecallTest, NoOverlapIsZero) {
  const std::vector<Interval> gt{{1, 4}};
  const RankedLists ranked{{at({5, 6}), at({7, 9})}};
  for (std::size_t k : {1, 5, 100}) {
    for (double theta : {0.1, 0.5}) EXPECT_EQ(recall_at_k(ranked, gt, k, theta), 0.0);
  }
}

TEST(RecallTest, ThresholdIsInclusive) {
  const std::vector<Interval> gt{{0, 2}};
  const RankedLists ranked{{at({0, 1})}};  // tIoU exactly 0.5
  EXPECT_EQ(recall_at_k(ranked, gt, 1, 0.5), 100.0);
}

TEST(RecallTest, MatchesExhaustiveScan) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Interval> gt;
    RankedLists ranked;
    for (int q = 0; q < 50; ++q) {
      const double s = rng.uniform(0, 100);
      gt.push_back({s, s + rng.uniform(1, 10)});
      std::vector<ScoredMoment> list;
      const std::size_t n = rng.below(12);
      for (std::size_t i = 0; i < n; ++i) {
        const double a = s + rng.uniform(-8, 8);
        list.push_back(at({std::max(0.0, a), std::max(0.0, a) + rng.uniform(0.5, 10)}));
      }
      ranked.push_back(list);
    }
    for (std::size_t k : {1, 5, 10}) {
      for (double theta : {0.1, 0.3, 0.5, 0.7}) {
        EXPECT_DOUBLE_EQ(recall_at_k(ranked, gt, k, theta),
                         oracle::brute_force_recall(ranked, gt, k, theta));
      }
    }
  }
}

TEST(RecallTest, Errors) {
  EXPECT_THROW(recall_at_k(RankedLists{}, std::vector<Interval>{}, 1, 0.5),
               UsageError);
  EXPECT_THROW(recall_at_k(RankedLists(2), std::vector<Interval>(1), 1, 0.5),
               DimensionError);
}

TEST(MeanRecallTest, MeanOverThresholds) {
  const std::vector<double> thetas{0.1, 0.3, 0.5};
  EXPECT_DOUBLE_EQ(mean_recall_k({{0.1, 10}, {0.3, 20}, {0.5, 30}}, thetas), 20.0);
  EXPECT_DOUBLE_EQ(mean_recall_k({{0.1, 7.5}, {0.3, 7.5}, {0.5, 7.5}}, thetas), 7.5);
  EXPECT_THROW(mean_recall_k({{0.1, 10}, {0.3, 20}}, thetas), UsageError);
}

TEST(MeanRecallTest, ReferenceRows) {
  const std::vector<std::optional<double>> vsl{11.38, 19.64, 24.27, 36.09, 42.12};
  EXPECT_NEAR(mean_recall_all(vsl), 26.70, 0.005);
  const std::vector<std::optional<double>> detr{6.72, 19.68, 23.85, 24.67,
                                                std::nullopt};
  EXPECT_NEAR(mean_recall_all(detr), 18.73, 0.005);
}

TEST(MeanRecallTest, SingletonAndEmpty) {
  const std::vector<std::optional<double>> one{std::nullopt, 42.0};
  EXPECT_EQ(mean_recall_all(one), 42.0);
  const std::vector<std::optional<double>> none{std::nullopt};
  EXPECT_THROW(mean_recall_all(none), UsageError);
}

TEST(MeanRecallTest, MatchesRecomputationFromGrid) {
  Rng rng(2);
  const std::vector<Interval> gt{{1, 5}, {20, 24}, {40, 41}, {60, 70}};
  RankedLists ranked(gt.size());
  for (std::size_t q = 0; q < gt.size(); ++q) {
    for (int i = 0; i < 8; ++i) {
      const double a = gt[q].start_s + rng.uniform(-3, 3);
      ranked[q].push_back(at({std::max(0.0, a), std::max(0.0, a) + rng.uniform(0.5, 8)}));
    }
  }
  const EvalConfig cfg;
  const auto report = evaluate(dataset_with(gt), Split::kTest, keyed(ranked), cfg);
  double all = 0.0;
  for (std::size_t k = 0; k < cfg.ks.size(); ++k) {
    double sum = 0.0;
    for (double theta : cfg.thresholds) {
      sum += oracle::brute_force_recall(ranked, gt, cfg.ks[k], theta);
    }
    EXPECT_NEAR(report.mr_at_k[k], sum / 3.0, 1e-9);
    all += sum / 3.0;
  }
  EXPECT_NEAR(report.mr_all, all / cfg.ks.size(), 1e-9);
}

TEST(EvaluateTest, PerfectPredictionsScoreHundred) {
  const std::vector<Interval> gt{{1, 4}, {10, 12}, {30, 31}};
  RankedLists ranked;
  for (const auto& g : gt) ranked.push_back({at(g, 0.9)});
  const auto report = evaluate(dataset_with(gt), Split::kTest, keyed(ranked), {});
  EXPECT_EQ(report.query_count, 3u);
  for (const auto& row : report.recall) {
    for (double v : row) EXPECT_EQ(v, 100.0);
  }
  EXPECT_EQ(report.mr_all, 100.0);
}

TEST(EvaluateTest, ActionlessFilterWithNoFlaggedQueriesIsUsageError) {
  EvalConfig cfg;
  cfg.subset = QuerySubset::kActionless;
  const std::vector<Interval> gt{{1, 4}};
  EXPECT_THROW(evaluate(dataset_with(gt), Split::kTest, keyed({{at(gt[0])}}), cfg),
               UsageError);
}

TEST(EvaluateTest, ActionlessFilterSelectsFlaggedQueries) {
  EvalConfig cfg;
  cfg.subset = QuerySubset::kActionless;
  const std::vector<Interval> gt{{1, 4}, {10, 12}};
  const auto report =
      evaluate(dataset_with(gt, {false, true}), Split::kTest,
               keyed({{at({50, 60})}, {at(gt[1])}}), cfg);
  EXPECT_EQ(report.query_count, 1u);
  EXPECT_EQ(report.mr_all, 100.0);
}

TEST(EvaluateTest, MissingPredictionsCountAsMissesWithWarning) {
  const std::vector<Interval> gt{{1, 4}, {10, 12}};
  std::ostringstream warnings;
  const auto report = evaluate(dataset_with(gt), Split::kTest,
                               keyed({{at(gt[0])}}), {}, &warnings);
  EXPECT_EQ(report.queries_without_predictions, 1u);
  EXPECT_EQ(report.at(1, 0.5), 50.0);
  EXPECT_NE(warnings.str().find("q1"), std::string::npos);
}

TEST(EvaluateTest, GridIsMonotone) {
  Rng rng(3);
  std::vector<Interval> gt;
  RankedLists ranked;
  for (int q = 0; q < 40; ++q) {
    const double s = rng.uniform(0, 150);
    gt.push_back({s, s + rng.uniform(1, 12)});
    std::vector<ScoredMoment> list;
    for (int i = 0; i < 120; ++i) {
      const double a = rng.uniform(0, 160);
      list.push_back(at({a, a + rng.uniform(0.5, 15)}));
    }
    ranked.push_back(list);
  }
  const auto r = evaluate(dataset_with(gt), Split::kTest, keyed(ranked), {});
  for (std::size_t t = 0; t < r.thresholds.size(); ++t) {
    for (std::size_t k = 1; k < r.ks.size(); ++k) {
      EXPECT_GE(r.recall[t][k], r.recall[t][k - 1]);
    }
  }
  for (std::size_t t = 1; t < r.thresholds.size(); ++t) {
    for (std::size_t k = 0; k < r.ks.size(); ++k) {
      EXPECT_LE(r.recall[t][k], r.recall[t - 1][k]);
    }
  }
}

TEST(EvaluateTest, JsonAndCsvLayout) {
  const std::vector<Interval> gt{{1, 4}};
  const auto r = evaluate(dataset_with(gt), Split::kTest, keyed({{at(gt[0])}}), {});
  const auto doc = nlohmann::json::parse(metrics_to_json(r));
  EXPECT_EQ(doc["mR_all"].get<double>(), 100.0);
  EXPECT_EQ(doc["recall"]["IoU=0.5"]["R@5"].get<double>(), 100.0);
  EXPECT_EQ(doc["mean_recall"].size(), 5u);
  EXPECT_EQ(doc["query_count"].get<int>(), 1);

  const std::string csv = metrics_to_csv(r);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "iou,R@1,R@5,R@10,R@50,R@100");
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("0.1,100.0000", 0), 0u);
  int rows = 1;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 4);  // three thresholds and the mR row
}

TEST(EvalConfigTest, Validation) {
  EvalConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.ks = {5, 1};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.thresholds = {0.0};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.nms_threshold = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(AurocTest, MatchesPairwiseOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<bool> labels;
    std::vector<double> scores;
    const std::size_t n = 2 + rng.below(80);
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back(i == 0 ? true : i == 1 ? false : rng.below(2) == 1);
      scores.push_back(std::floor(rng.uniform() * 8) / 8);  // forces ties
    }
    EXPECT_NEAR(auroc(labels, scores), oracle::pairwise_auroc(labels, scores), 1e-12);
  }
}

TEST(AurocTest, ExtremesAndErrors) {
  const std::vector<bool> labels{true, true, false, false};
  const std::vector<double> good{0.9, 0.8, 0.2, 0.1};
  const std::vector<double> bad{0.1, 0.2, 0.8, 0.9};
  EXPECT_EQ(auroc(labels, good), 1.0);
  EXPECT_EQ(auroc(labels, bad), 0.0);
  EXPECT_THROW(auroc({true, true}, std::vector<double>{0.1, 0.2}), UsageError);
}

TEST(MrkTableTest, BundledFixture) {
  std::ifstream in(std::string(GUIDED_FIXTURE_DIR) + "/mrk_table.json");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto rows = parse_mrk_table(ss.str());
  ASSERT_EQ(rows.size(), 2u);
  const std::vector<std::size_t> ks{1, 5, 10, 50, 100};
  EXPECT_EQ(rows[0].name, "VSL-Net");
  EXPECT_NEAR(mean_recall_all(rows[0], ks), 26.70, 0.005);
  EXPECT_NEAR(mean_recall_all(rows[1], ks), 18.73, 0.005);
  EXPECT_THROW(parse_mrk_table("{\"rows\": 3}"), FormatError);
}

}  // namespace
}  // namespace guided
