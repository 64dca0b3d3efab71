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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "guided/dataset.hpp"
#include "guided/errors.hpp"
#include "guided/eval.hpp"
#include "guided/fusion.hpp"
#include "guided/grounding.hpp"
#include "guided/guidance.hpp"
#include "guided/pipeline.hpp"
#include "guided/run_config.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string data;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config, "Run configuration (JSON)");
  cmd->add_option("--set", opts.overrides,
                  "Override a config value, e.g. --set train.lr=1e-4");
  cmd->add_option("--seed", opts.seed, "Seed for every stochastic stage");
  cmd->add_option("--threads", opts.threads, "Worker threads");
  cmd->add_option("--data", opts.data, "Dataset root");
  cmd->add_option("--out", opts.out, "Output directory");
}

guided::RunConfig resolve(const CommonOptions& opts) {
  std::vector<std::string> overrides = opts.overrides;
  if (opts.seed) overrides.push_back("seed=" + std::to_string(*opts.seed));
  if (opts.threads) {
    overrides.push_back("threads=" + std::to_string(*opts.threads));
  }
  if (!opts.data.empty()) overrides.push_back("dataset=\"" + opts.data + "\"");
  if (!opts.out.empty()) overrides.push_back("output=\"" + opts.out + "\"");
  if (opts.config.empty()) return guided::parse_run_config("{}", overrides);
  return guided::load_run_config(opts.config, overrides);
}

fs::path prepare_output(const guided::RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output, ec);
  if (ec) {
    throw guided::IoError("cannot create " + cfg.output.string() + ": " +
                          ec.message());
  }
  return cfg.output;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw guided::IoError("cannot write " + path.string());
  out << text;
  if (!out) throw guided::IoError("short write to " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw guided::IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

guided::FeatureStore load_features(const guided::RunConfig& cfg,
                                   const guided::GroundingDataset& ds) {
  return guided::FeatureStore::load(ds, cfg.modalities.audio);
}

fs::path or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback : fs::path(given);
}

int run_gen_synth(const CommonOptions& opts) {
  const guided::RunConfig cfg = resolve(opts);
  const guided::GroundingDataset ds =
      guided::generate_synthetic(cfg.synthetic, cfg.dataset);
  std::cout << "wrote " << ds.videos.size() << " videos, " << ds.queries.size()
            << " queries to " << cfg.dataset.string() << "\n";
  return 0;
}

int run_train(const CommonOptions& opts) {
  const guided::RunConfig cfg = resolve(opts);
  const fs::path out = prepare_output(cfg);
  const guided::GroundingDataset ds = guided::load_dataset(cfg.dataset);
  const guided::FeatureStore features = load_features(cfg, ds);
  const guided::TrainResult result = guided::train_stage(cfg, ds, features);
  guided::save_model(result.model, out / "model.bin");
  std::ostringstream csv;
  csv << "epoch,mean_loss\n";
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", e + 1, result.epoch_loss[e]);
    csv << buf;
  }
  write_text(out / "loss.csv", csv.str());
  std::cout << "trained " << result.model.parameter_count()
            << " parameters; final loss " << result.epoch_loss.back() << "\n";
  return 0;
}

int run_score(const CommonOptions& opts, const std::string& model_path) {
  const guided::RunConfig cfg = resolve(opts);
  const fs::path out = prepare_output(cfg);
  const guided::GroundingDataset ds = guided::load_dataset(cfg.dataset);
  const guided::FeatureStore features = load_features(cfg, ds);
  const guided::GuidanceModel model =
      guided::load_model(or_default(model_path, out / "model.bin"));
  const guided::GuidanceFile scores =
      guided::score_stage(cfg, ds, features, model);
  guided::save_guidance(out / "guidance.json", scores);
  std::cout << "scored " << scores.records.size() << " records";
  try {
    std::cout << "; window AUROC "
              << guided::guidance_auroc(ds, cfg.split, model.config(), scores);
  } catch (const guided::UsageError&) {
    // Single-class label sets have no AUROC.
  }
  std::cout << "\n";
  return 0;
}

int run_ground(const CommonOptions& opts) {
  const guided::RunConfig cfg = resolve(opts);
  const fs::path out = prepare_output(cfg);
  const guided::GroundingDataset ds = guided::load_dataset(cfg.dataset);
  const guided::FeatureStore features = load_features(cfg, ds);
  const auto scorer = guided::make_scorer(cfg);
  const auto predictions = guided::ground_stage(cfg, ds, features, *scorer);
  guided::save_predictions(out / "predictions.jsonl", predictions);
  std::size_t total = 0;
  for (const auto& q : predictions) total += q.moments.size();
  std::cout << "grounded " << predictions.size() << " queries with "
            << scorer->name() << " (" << total << " predictions)\n";
  return 0;
}

int run_fuse(const CommonOptions& opts, const std::string& predictions_path,
             const std::string& guidance_path, bool unguided) {
  const guided::RunConfig cfg = resolve(opts);
  const fs::path out = prepare_output(cfg);
  const guided::GroundingDataset ds = guided::load_dataset(cfg.dataset);
  const auto predictions = guided::load_predictions(
      or_default(predictions_path, out / "predictions.jsonl"));
  std::optional<guided::GuidanceFile> guidance;
  if (!unguided) {
    guidance = guided::load_guidance(
        or_default(guidance_path, out / "guidance.json"));
  }
  const auto ranked = guided::fuse_stage(cfg, ds, predictions,
                                         guidance ? &*guidance : nullptr);
  const fs::path target = out / (unguided ? "ranked.jsonl" : "fused.jsonl");
  guided::save_predictions(target, ranked);
  std::cout << "wrote " << target.string() << "\n";
  return 0;
}

int run_eval(const CommonOptions& opts, const std::string& ranked_path,
             const std::string& mrk_table) {
  if (!mrk_table.empty()) {
    const std::vector<std::size_t> ks{1, 5, 10, 50, 100};
    for (const guided::MrkRow& row :
         guided::parse_mrk_table(read_text(mrk_table))) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.2f", guided::mean_recall_all(row, ks));
      std::cout << row.name << " mR_all " << buf << "\n";
    }
    return 0;
  }
  const guided::RunConfig cfg = resolve(opts);
  const fs::path out = prepare_output(cfg);
  const guided::GroundingDataset ds = guided::load_dataset(cfg.dataset);
  const auto ranked =
      guided::load_predictions(or_default(ranked_path, out / "fused.jsonl"));
  const guided::MetricsReport report =
      guided::evaluate(ds, cfg.split, ranked, cfg.eval, &std::cerr);
  write_text(out / "metrics.json", guided::metrics_to_json(report));
  write_text(out / "metrics.csv", guided::metrics_to_csv(report));
  std::cout << guided::metrics_to_csv(report);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", report.mr_all);
  std::cout << "mR_all " << buf << " over " << report.query_count
            << " queries\n";
  return 0;
}

int run_bench(const CommonOptions& opts, const std::string& model_path) {
  const guided::RunConfig cfg = resolve(opts);
  const fs::path out = prepare_output(cfg);
  const guided::GroundingDataset ds = guided::load_dataset(cfg.dataset);
  const guided::FeatureStore features = load_features(cfg, ds);
  const guided::GuidanceConfig gcfg = cfg.guidance_for(ds.dims);
  std::optional<guided::GuidanceModel> model;
  if (!model_path.empty()) {
    model.emplace(guided::load_model(model_path));
  } else {
    // Pass counts do not depend on the weights.
    model.emplace(gcfg);
    model->init(cfg.seed);
  }
  const guided::CostReport report =
      guided::bench_cost(cfg, ds, features, *model);
  write_text(out / "cost.json", guided::cost_to_json(report));
  std::cout << "guidance passes " << report.measured_guidance_passes
            << " (formula " << report.guidance_passes << "), grounding passes "
            << report.measured_grounding_passes << " (formula "
            << report.grounding_passes << ")\n";
  if (!report.counts_match()) {
    throw guided::DataError("measured forward passes differ from the "
                            "closed-form counts");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guided video grounding: guidance training, long-form "
               "grounding, fusion and evaluation"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string model_path, predictions_path, guidance_path, ranked_path,
      mrk_table;
  bool unguided = false;

  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic dataset");
  add_common(gen, opts);
  auto* train = app.add_subcommand("train-guidance", "Train the guidance model");
  add_common(train, opts);
  auto* score = app.add_subcommand("score-windows",
                                   "Score guidance windows of the split");
  add_common(score, opts);
  score->add_option("--model", model_path, "Model file (default out/model.bin)");
  auto* ground = app.add_subcommand("ground", "Run long-form grounding");
  add_common(ground, opts);
  auto* fuse = app.add_subcommand("fuse", "Fuse, re-rank and suppress");
  add_common(fuse, opts);
  fuse->add_option("--predictions", predictions_path, "Predictions JSONL");
  fuse->add_option("--guidance", guidance_path, "Guidance scores JSON");
  fuse->add_flag("--unguided", unguided, "Re-rank without guidance");
  auto* eval = app.add_subcommand("eval", "Compute the recall grid");
  add_common(eval, opts);
  eval->add_option("--ranked", ranked_path,
                   "Ranked predictions (default out/fused.jsonl)");
  eval->add_option("--mrk-table", mrk_table,
                   "Print mR_all for each row of an mR@K table and exit");
  auto* bench = app.add_subcommand("bench", "Count and time forward passes");
  add_common(bench, opts);
  bench->add_option("--model", model_path, "Model file (default: fresh model)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return guided::exit_code_for(guided::ErrorKind::kUsage);
  }

  try {
    if (*gen) return run_gen_synth(opts);
    if (*train) return run_train(opts);
    if (*score) return run_score(opts, model_path);
    if (*ground) return run_ground(opts);
    if (*fuse) return run_fuse(opts, predictions_path, guidance_path, unguided);
    if (*eval) return run_eval(opts, ranked_path, mrk_table);
    if (*bench) return run_bench(opts, model_path);
  } catch (const guided::Error& e) {
    std::cerr << "error: " << guided::error_kind_name(e.kind()) << ": "
              << e.what() << "\n";
    return guided::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
