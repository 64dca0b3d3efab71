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

#ifndef GUIDED_EVAL_HPP_
#define GUIDED_EVAL_HPP_

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "guided/dataset.hpp"
#include "guided/grounding.hpp"
#include "guided/temporal.hpp"

namespace guided {

enum class QuerySubset { kAll, kActionless };

std::string_view subset_name(QuerySubset s);
QuerySubset parse_subset(std::string_view name);

struct EvalConfig {
  std::vector<std::size_t> ks{1, 5, 10, 50, 100};
  std::vector<double> thresholds{0.1, 0.3, 0.5};
  double nms_threshold = 0.3;
  QuerySubset subset = QuerySubset::kAll;

  // K strictly ascending and positive, every threshold in (0, 1], NMS
  // threshold in [0, 1]. Throws ConfigError.
  void validate() const;
};

// Percentage of queries whose first k ranked predictions include one with
// tIoU >= theta against the query's ground truth. Queries with fewer than
// k predictions use what they have. Throws UsageError on an empty query set
// and DimensionError when the spans differ in length.
double recall_at_k(std::span<const std::vector<ScoredMoment>> ranked,
                   std::span<const Interval> ground_truth, std::size_t k,
                   double theta);

// Mean of R@K over `thresholds`. Throws UsageError when one is missing.
double mean_recall_k(const std::map<double, double>& recall_by_theta,
                     std::span<const double> thresholds);

// Mean over the K values present. Throws UsageError when none is.
double mean_recall_all(std::span<const std::optional<double>> mr_at_k);

struct MetricsReport {
  std::vector<std::size_t> ks;
  std::vector<double> thresholds;
  // recall[t][k] in percent, indexed like `thresholds` and `ks`.
  std::vector<std::vector<double>> recall;
  std::vector<double> mr_at_k;
  double mr_all = 0.0;
  std::size_t query_count = 0;
  std::size_t queries_without_predictions = 0;
  QuerySubset subset = QuerySubset::kAll;

  double at(std::size_t k, double theta) const;
  bool operator==(const MetricsReport&) const = default;
};

// Full grid over the split's queries after the subset filter. Queries with
// no predictions count as misses and are reported on `warnings`. Throws
// UsageError when the filtered set is empty.
MetricsReport evaluate(const GroundingDataset& ds, Split split,
                       std::span<const QueryPredictions> ranked,
                       const EvalConfig& cfg, std::ostream* warnings = nullptr);

std::string metrics_to_json(const MetricsReport& report);
// Rows are thresholds, columns K.
std::string metrics_to_csv(const MetricsReport& report);

// Area under the ROC curve with average ranks for ties. Throws UsageError
// when either class is absent.
double auroc(const std::vector<bool>& labels, std::span<const double> scores);

// Rows of an mR@K table: {"rows": [{"name", "mr_at_k": {"1": v,
// ...}}]}. Missing K entries are simply absent.
struct MrkRow {
  std::string name;
  std::map<std::size_t, double> mr_at_k;
};
std::vector<MrkRow> parse_mrk_table(std::string_view json_text);
double mean_recall_all(const MrkRow& row, std::span<const std::size_t> ks);

}  // namespace guided

#endif  // GUIDED_EVAL_HPP_
