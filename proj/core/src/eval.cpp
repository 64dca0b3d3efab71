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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

#include "guided/errors.hpp"
#include "json.hpp"

namespace guided {

std::string_view subset_name(QuerySubset s) {
  return s == QuerySubset::kActionless ? "actionless" : "all";
}

QuerySubset parse_subset(std::string_view name) {
  if (name == "all") return QuerySubset::kAll;
  if (name == "actionless") return QuerySubset::kActionless;
  throw ConfigError("unknown query subset \"" + std::string(name) +
                    "\" (expected all or actionless)");
}

void EvalConfig::validate() const {
  if (ks.empty() || thresholds.empty()) {
    throw ConfigError("eval ks and thresholds must be non-empty");
  }
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == 0 || (i > 0 && ks[i] <= ks[i - 1])) {
      throw ConfigError("eval ks must be positive and strictly ascending");
    }
  }
  for (double t : thresholds) {
    if (!(t > 0.0 && t <= 1.0)) {
      throw ConfigError("eval thresholds must lie in (0, 1]");
    }
  }
  if (!(nms_threshold >= 0.0 && nms_threshold <= 1.0)) {
    throw ConfigError("eval nms_threshold must lie in [0, 1]");
  }
}

double recall_at_k(std::span<const std::vector<ScoredMoment>> ranked,
                   std::span<const Interval> ground_truth, std::size_t k,
                   double theta) {
  if (ranked.size() != ground_truth.size()) {
    throw DimensionError("recall_at_k: " + std::to_string(ranked.size()) +
                         " prediction lists for " +
                         std::to_string(ground_truth.size()) + " queries");
  }
  if (ranked.empty()) throw UsageError("recall_at_k: empty query set");
  std::size_t hits = 0;
  for (std::size_t q = 0; q < ranked.size(); ++q) {
    const std::size_t n = std::min(k, ranked[q].size());
    for (std::size_t r = 0; r < n; ++r) {
      if (tiou(ranked[q][r].interval, ground_truth[q]) >= theta) {
        ++hits;
        break;
      }
    }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ranked.size());
}

double mean_recall_k(const std::map<double, double>& recall_by_theta,
                     std::span<const double> thresholds) {
  if (thresholds.empty()) throw UsageError("mean_recall_k: no thresholds");
  double total = 0.0;
  for (double t : thresholds) {
    const auto it = recall_by_theta.find(t);
    if (it == recall_by_theta.end()) {
      throw UsageError("mean_recall_k: missing recall for IoU threshold " +
                       std::to_string(t));
    }
    total += it->second;
  }
  return total / static_cast<double>(thresholds.size());
}

double mean_recall_all(std::span<const std::optional<double>> mr_at_k) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& v : mr_at_k) {
    if (!v) continue;
    total += *v;
    ++n;
  }
  if (n == 0) throw UsageError("mean_recall_all: no mR@K values present");
  return total / static_cast<double>(n);
}

double MetricsReport::at(std::size_t k, double theta) const {
  const auto ki = std::find(ks.begin(), ks.end(), k);
  const auto ti = std::find(thresholds.begin(), thresholds.end(), theta);
  if (ki == ks.end() || ti == thresholds.end()) {
    throw UsageError("metrics report has no entry for K=" + std::to_string(k) +
                     ", IoU=" + std::to_string(theta));
  }
  return recall[static_cast<std::size_t>(ti - thresholds.begin())]
               [static_cast<std::size_t>(ki - ks.begin())];
}

MetricsReport evaluate(const GroundingDataset& ds, Split split,
                       std::span<const QueryPredictions> ranked,
                       const EvalConfig& cfg, std::ostream* warnings) {
  cfg.validate();
  std::map<std::string_view, const std::vector<ScoredMoment>*> by_query;
  for (const QueryPredictions& q : ranked) by_query[q.query_id] = &q.moments;

  MetricsReport report;
  report.ks = cfg.ks;
  report.thresholds = cfg.thresholds;
  report.subset = cfg.subset;

  std::vector<std::vector<ScoredMoment>> lists;
  std::vector<Interval> gts;
  for (const QueryRecord* q : ds.queries_in(split)) {
    if (cfg.subset == QuerySubset::kActionless && !q->actionless) continue;
    const auto it = by_query.find(q->id);
    if (it == by_query.end() || it->second->empty()) {
      ++report.queries_without_predictions;
      if (warnings) {
        *warnings << "warning: query " << q->id
                  << " has no predictions; counted as a miss\n";
      }
      lists.emplace_back();
    } else {
      lists.push_back(*it->second);
    }
    gts.push_back(q->ground_truth);
  }
  if (lists.empty()) {
    throw UsageError("evaluation set is empty (split " +
                     std::string(split_name(split)) + ", subset " +
                     std::string(subset_name(cfg.subset)) + ")");
  }
  report.query_count = lists.size();

  report.recall.assign(cfg.thresholds.size(),
                       std::vector<double>(cfg.ks.size(), 0.0));
  for (std::size_t t = 0; t < cfg.thresholds.size(); ++t) {
    for (std::size_t k = 0; k < cfg.ks.size(); ++k) {
      report.recall[t][k] = recall_at_k(lists, gts, cfg.ks[k], cfg.thresholds[t]);
    }
  }
  std::vector<std::optional<double>> mrk;
  for (std::size_t k = 0; k < cfg.ks.size(); ++k) {
    std::map<double, double> by_theta;
    for (std::size_t t = 0; t < cfg.thresholds.size(); ++t) {
      by_theta[cfg.thresholds[t]] = report.recall[t][k];
    }
    report.mr_at_k.push_back(mean_recall_k(by_theta, cfg.thresholds));
    mrk.emplace_back(report.mr_at_k.back());
  }
  report.mr_all = mean_recall_all(mrk);
  return report;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string theta_label(double t) {
  std::ostringstream os;
  os << t;
  return os.str();
}

}  // namespace

std::string metrics_to_json(const MetricsReport& r) {
  nlohmann::ordered_json doc;
  doc["subset"] = std::string(subset_name(r.subset));
  doc["query_count"] = r.query_count;
  doc["queries_without_predictions"] = r.queries_without_predictions;
  doc["ks"] = r.ks;
  doc["thresholds"] = r.thresholds;
  nlohmann::ordered_json grid = nlohmann::ordered_json::object();
  for (std::size_t t = 0; t < r.thresholds.size(); ++t) {
    nlohmann::ordered_json row = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < r.ks.size(); ++k) {
      row["R@" + std::to_string(r.ks[k])] = r.recall[t][k];
    }
    grid["IoU=" + theta_label(r.thresholds[t])] = std::move(row);
  }
  doc["recall"] = std::move(grid);
  nlohmann::ordered_json mrk = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < r.ks.size(); ++k) {
    mrk["mR@" + std::to_string(r.ks[k])] = r.mr_at_k[k];
  }
  doc["mean_recall"] = std::move(mrk);
  doc["mR_all"] = r.mr_all;
  return doc.dump(2) + "\n";
}

std::string metrics_to_csv(const MetricsReport& r) {
  std::ostringstream os;
  os << "iou";
  for (std::size_t k : r.ks) os << ",R@" << k;
  os << "\n";
  for (std::size_t t = 0; t < r.thresholds.size(); ++t) {
    os << theta_label(r.thresholds[t]);
    for (std::size_t k = 0; k < r.ks.size(); ++k) {
      os << "," << fixed(r.recall[t][k], 4);
    }
    os << "\n";
  }
  os << "mR";
  for (double v : r.mr_at_k) os << "," << fixed(v, 4);
  os << "\n";
  return os.str();
}

double auroc(const std::vector<bool>& labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) {
    throw DimensionError("auroc: labels and scores differ in length");
  }
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t m = i; m < j; ++m) {
      if (labels[order[m]]) {
        positive_rank_sum += avg_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw UsageError("auroc needs both positive and negative labels");
  }
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) /
         (p * static_cast<double>(negatives));
}

std::vector<MrkRow> parse_mrk_table(std::string_view json_text) {
  std::vector<MrkRow> rows;
  try {
    const nlohmann::json doc = nlohmann::json::parse(json_text);
    for (const auto& j : doc.at("rows")) {
      MrkRow row;
      row.name = j.at("name").get<std::string>();
      for (const auto& [key, value] : j.at("mr_at_k").items()) {
        std::size_t k = 0;
        try {
          k = std::stoul(key);
        } catch (const std::exception&) {
          throw FormatError("mR@K table: bad K \"" + key + "\"");
        }
        if (!value.is_null()) row.mr_at_k[k] = value.get<double>();
      }
      rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("mR@K table: ") + e.what());
  }
  return rows;
}

double mean_recall_all(const MrkRow& row, std::span<const std::size_t> ks) {
  std::vector<std::optional<double>> values;
  for (std::size_t k : ks) {
    const auto it = row.mr_at_k.find(k);
    values.push_back(it == row.mr_at_k.end() ? std::nullopt
                                             : std::optional(it->second));
  }
  return mean_recall_all(values);
}

}  // namespace guided
