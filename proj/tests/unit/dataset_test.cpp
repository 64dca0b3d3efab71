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

#include <cmath>
#include <cstring>
#include <sstream>

#include <gtest/gtest.h>

#include "guided/errors.hpp"
#include "guided/rng.hpp"
#include "temp_dir.hpp"

namespace guided {
namespace {

using testing::TempDir;

SyntheticConfig small_synthetic(std::uint64_t seed = 0) {
  SyntheticConfig c;
  c.num_videos = 5;
  c.frames_per_video = 160;
  c.moments_per_video = 2;
  c.dims = {.visual = 16, .audio = 8, .text = 16, .text_len = 4};
  c.signature_dim = 4;
  c.seed = seed;
  return c;
}

std::string emb1_bytes(std::uint32_t rows, std::uint32_t cols,
                       std::size_t floats) {
  std::string s = "EMB1";
  for (std::uint32_t v : {rows, cols}) {
    for (int b = 0; b < 4; ++b) s.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
  }
  for (std::size_t i = 0; i < floats; ++i) {
    float f = static_cast<float>(i) * 0.5f;
    char buf[4];
    std::memcpy(buf, &f, 4);
    s.append(buf, 4);
  }
  return s;
}

TEST(Emb1Test, ReadsDeclaredShape) {
  std::istringstream in(emb1_bytes(4, 3, 12));
  const Matrix m = read_emb1(in, "mem");
  ASSERT_EQ(m.rows(), 4u);
  ASSERT_EQ(m.cols(), 3u);
  EXPECT_EQ(m(3, 2), 5.5f);
}

TEST(Emb1Test, ShortPayloadIsFormatError) {
  std::istringstream in(emb1_bytes(4, 3, 11));
  EXPECT_THROW(read_emb1(in, "mem"), FormatError);
}

TEST(Emb1Test, BadMagicIsFormatError) {
  std::string bytes = emb1_bytes(1, 1, 1);
  bytes[3] = '2';
  std::istringstream in(bytes);
  EXPECT_THROW(read_emb1(in, "mem"), FormatError);
}

TEST(Emb1Test, HeaderIsLittleEndian) {
  std::ostringstream out;
  write_emb1(out, Matrix(2, 258));
  const std::string s = out.str();
  ASSERT_EQ(s.size(), 12u + 2 * 258 * 4);
  EXPECT_EQ(s.substr(0, 4), "EMB1");
  EXPECT_EQ(static_cast<unsigned char>(s[4]), 2);
  EXPECT_EQ(static_cast<unsigned char>(s[8]), 2);
  EXPECT_EQ(static_cast<unsigned char>(s[9]), 1);
}

TEST(Emb1Test, RoundTripIsBitwiseIdentical) {
  TempDir dir("emb1");
  Rng rng(1);
  Matrix m(100, 512);
  for (float& v : m.values()) v = static_cast<float>(rng.normal());
  m[7] = -0.0f;
  write_embeddings(dir / "m.emb", m);
  const Matrix back = load_embeddings(dir / "m.emb");
  ASSERT_TRUE(back.same_shape(m));
  EXPECT_EQ(std::memcmp(back.data(), m.data(), m.size() * sizeof(float)), 0);
}

TEST(Emb1Test, TrailingBytesAndWrongWidthAreRejected) {
  TempDir dir("emb1_trailing");
  testing::write_file(dir / "m.emb", emb1_bytes(1, 2, 3));
  EXPECT_THROW(load_embeddings(dir / "m.emb"), FormatError);
  testing::write_file(dir / "n.emb", emb1_bytes(1, 2, 2));
  EXPECT_THROW(load_embeddings(dir / "n.emb", 3, "visual"), FormatError);
  EXPECT_THROW(load_embeddings(dir / "missing.emb"), IoError);
}

std::vector<Window> windows_256() { return generate_windows(256, 5.0, 64, 32); }

TEST(LabelTest, OverlapIsPositive) {
  const auto w = windows_256();  // w[0] = [0, 12.8]
  const auto l = label_windows_query_dependent("v", w, {12.0, 14.0}, "q");
  EXPECT_TRUE(l[0].label);
  EXPECT_EQ(l[0].query_id, "q");
}

TEST(LabelTest, DisjointIsNegative) {
  const auto w = generate_windows(256, 5.0, 64, 64);  // w[1] = [12.8, 25.6]
  const auto l = label_windows_query_dependent("v", w, {0.0, 2.0}, "q");
  EXPECT_FALSE(l[1].label);
}

TEST(LabelTest, AbuttingBoundaryIsNegative) {
  const auto w = windows_256();
  const auto l = label_windows_query_dependent("v", w, {12.8, 14.0}, "q");
  EXPECT_FALSE(l[0].label);
  EXPECT_TRUE(l[1].label);
}

TEST(LabelTest, NoMomentsMeansAllNegative) {
  const auto l = label_windows_query_agnostic("v", windows_256(), {});
  for (const auto& x : l) {
    EXPECT_FALSE(x.label);
    EXPECT_FALSE(x.query_id.has_value());
  }
}

TEST(LabelTest, TilingMomentsMakeEverythingPositive) {
  const std::vector<Interval> m{{0, 20}, {20, 40}, {40, 60}};
  for (const auto& x : label_windows_query_agnostic("v", windows_256(), m)) {
    EXPECT_TRUE(x.label);
  }
}

TEST(LabelTest, AgnosticEqualsOrFoldOfDependent) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto w = generate_windows(50 + rng.below(400), 5.0, 1 + rng.below(64));
    std::vector<Interval> moments;
    const std::size_t k = rng.below(5);
    for (std::size_t i = 0; i < k; ++i) {
      const double s = rng.uniform(0.0, 80.0);
      moments.push_back({s, s + rng.uniform(0.1, 10.0)});
    }
    std::vector<bool> fold(w.size(), false);
    for (const auto& m : moments) {
      const auto dep = label_windows_query_dependent("v", w, m, "q");
      for (std::size_t i = 0; i < w.size(); ++i) {
        fold[i] = fold[i] || dep[i].label;
      }
    }
    const auto ag = label_windows_query_agnostic("v", w, moments);
    for (std::size_t i = 0; i < w.size(); ++i) {
      ASSERT_EQ(ag[i].label, fold[i]);
    }
  }
}

TEST(ShortformTest, SingleMomentAssignedToItsClip) {
  VideoRecord v{.id = "v", .fps = 5.0, .num_frames = 450};  // 90 s
  const std::vector<Interval> m{{10, 20}};
  const auto clips = make_shortform_setup(v, m, 30.0);
  ASSERT_EQ(clips.size(), 1u);
  EXPECT_EQ(clips[0].clip, (Interval{0, 30}));
  EXPECT_EQ(clips[0].assigned, (Interval{10, 20}));
}

TEST(ShortformTest, MomentSpanningTwoClipsGoesToBoth) {
  VideoRecord v{.id = "v", .fps = 5.0, .num_frames = 450};
  const std::vector<Interval> m{{25, 35}};
  const auto clips = make_shortform_setup(v, m, 30.0);
  ASSERT_EQ(clips.size(), 2u);
  EXPECT_EQ(clips[0].clip, (Interval{0, 30}));
  EXPECT_EQ(clips[1].clip, (Interval{30, 60}));
  EXPECT_EQ(clips[1].assigned, (Interval{25, 35}));
}

TEST(ShortformTest, TiesGoToEarliestMomentAndTailIsTruncated) {
  VideoRecord v{.id = "v", .fps = 5.0, .num_frames = 350};  // 70 s
  const std::vector<Interval> m{{61, 63}, {65, 67}};
  const auto clips = make_shortform_setup(v, m, 30.0);
  ASSERT_EQ(clips.size(), 1u);
  EXPECT_EQ(clips[0].clip, (Interval{60, 70}));
  EXPECT_EQ(clips[0].assigned, (Interval{61, 63}));
}

TEST(ShortformTest, NoMomentsAndBadLength) {
  VideoRecord v{.id = "v", .fps = 5.0, .num_frames = 450};
  EXPECT_TRUE(make_shortform_setup(v, {}, 30.0).empty());
  EXPECT_THROW(make_shortform_setup(v, {}, 0.0), ConfigError);
}

TEST(AnnotationsTest, RoundTripIsIdentity) {
  TempDir dir("annotations");
  const GroundingDataset ds = generate_synthetic(small_synthetic(), dir.path());
  const std::string text = serialize_annotations(ds);
  const GroundingDataset back = parse_annotations(text, dir.path());
  EXPECT_EQ(back, ds);
  EXPECT_EQ(serialize_annotations(back), text);
  EXPECT_EQ(load_dataset(dir.path()), ds);
}

TEST(AnnotationsTest, MalformedDocumentsAreRejected) {
  EXPECT_THROW(parse_annotations("{", "."), FormatError);
  EXPECT_THROW(parse_annotations("[]", "."), FormatError);
  EXPECT_THROW(parse_annotations(R"({"videos":[],"queries":[]})", "."),
               FormatError);
}

TEST(AnnotationsTest, ValidateCatchesBrokenReferences) {
  GroundingDataset ds;
  ds.dims = {8, 8, 8, 4};
  ds.videos.push_back({.id = "v", .fps = 5.0, .num_frames = 50, .visual = "x"});
  ds.queries.push_back({.id = "q", .video_id = "w", .tokens = "t",
                        .ground_truth = {1, 2}});
  EXPECT_THROW(ds.validate(), DataError);
  ds.queries[0].video_id = "v";
  EXPECT_NO_THROW(ds.validate());
  ds.queries[0].ground_truth = {1, 11};  // past the 10 s duration
  EXPECT_THROW(ds.validate(), DataError);
  ds.queries[0].ground_truth = {3, 3};
  EXPECT_THROW(ds.validate(), DataError);
}

TEST(SyntheticTest, SameSeedGivesByteIdenticalFiles) {
  TempDir a("synth_a"), b("synth_b");
  generate_synthetic(small_synthetic(7), a.path());
  generate_synthetic(small_synthetic(7), b.path());
  EXPECT_TRUE(testing::same_tree(a.path(), b.path()));
  TempDir c("synth_c");
  generate_synthetic(small_synthetic(8), c.path());
  EXPECT_FALSE(testing::same_tree(a.path(), c.path()));
}

TEST(SyntheticTest, StructureFollowsConfig) {
  TempDir dir("synth_structure");
  const SyntheticConfig cfg = small_synthetic();
  const GroundingDataset ds = generate_synthetic(cfg, dir.path());
  EXPECT_NO_THROW(ds.validate());
  ASSERT_EQ(ds.videos.size(), 5u);
  ASSERT_EQ(ds.queries.size(), 10u);
  for (const auto& v : ds.videos) {
    const auto moments = ds.moments_for_video(v.id);
    ASSERT_EQ(moments.size(), 2u);
    // Non-overlapping and inside the configured length range.
    EXPECT_LT(moments[0].end_s, moments[1].start_s);
    for (const auto& m : moments) {
      EXPECT_GE(m.length() * cfg.fps, cfg.min_moment_frames - 1e-9);
      EXPECT_LE(m.length() * cfg.fps, cfg.max_moment_frames + 1e-9);
    }
  }
  // 0.6 / 0.1 / 0.3 of five videos.
  EXPECT_EQ(ds.videos_in(Split::kTrain).size(), 3u);
  EXPECT_EQ(ds.videos_in(Split::kVal).size(), 0u);
  EXPECT_EQ(ds.videos_in(Split::kTest).size(), 2u);

  const FeatureStore fs = FeatureStore::load(ds, true);
  EXPECT_EQ(fs.video("v000").visual.rows(), 160u);
  EXPECT_EQ(fs.video("v000").audio->cols(), 8u);
  EXPECT_EQ(fs.tokens("v000_q0").rows(), 4u);
}

// Mean squared feature norm per frame inside and outside moments.
std::pair<double, double> energy_split(const GroundingDataset& ds,
                                       const FeatureStore& fs) {
  double in_sum = 0.0, out_sum = 0.0;
  std::size_t in_n = 0, out_n = 0;
  for (const auto& v : ds.videos) {
    const Matrix& x = fs.video(v.id).visual;
    const auto moments = ds.moments_for_video(v.id);
    for (std::size_t f = 0; f < x.rows(); ++f) {
      const double t = (static_cast<double>(f) + 0.5) / v.fps;
      bool inside = false;
      for (const auto& m : moments) inside |= m.start_s <= t && t < m.end_s;
      double e = 0.0;
      for (float val : x.row(f)) e += static_cast<double>(val) * val;
      (inside ? in_sum : out_sum) += e / static_cast<double>(x.cols());
      ++(inside ? in_n : out_n);
    }
  }
  return {in_sum / in_n, out_sum / out_n};
}

TEST(SyntheticTest, PlantedSignalRaisesFrameEnergyOnlyWhenAlphaPositive) {
  TempDir dir("synth_alpha");
  SyntheticConfig cfg = small_synthetic();
  cfg.dims.visual = cfg.dims.text = 128;
  const auto ds = generate_synthetic(cfg, dir.path());
  const auto [in, out] = energy_split(ds, FeatureStore::load(ds));
  // alpha^2 + sigma^2 = 5 against sigma^2 = 1.
  EXPECT_NEAR(in, 5.0, 1.0);
  EXPECT_NEAR(out, 1.0, 0.05);

  TempDir null_dir("synth_null");
  cfg.signal_strength = 0.0;
  const auto null_ds = generate_synthetic(cfg, null_dir.path());
  const auto [in0, out0] = energy_split(null_ds, FeatureStore::load(null_ds));
  EXPECT_NEAR(in0, out0, 0.05);
}

TEST(SyntheticTest, DefaultPositiveFractionMatchesFrameCountOracle) {
  TempDir a("synth_default_a"), b("synth_default_b");
  const SyntheticConfig cfg;  // 20 videos x 512 frames, 3 moments
  const GroundingDataset ds = generate_synthetic(cfg, a.path());
  const GroundingDataset again = generate_synthetic(cfg, b.path());
  EXPECT_EQ(ds, again);

  std::size_t positives = 0, total = 0, oracle_positives = 0;
  std::size_t dep_positives = 0, dep_total = 0;
  for (const auto& v : ds.videos) {
    const auto w = generate_windows(v.num_frames, v.fps, 64, 32);
    const auto moments = ds.moments_for_video(v.id);
    for (const auto& l : label_windows_query_agnostic(v.id, w, moments)) {
      positives += l.label;
      ++total;
    }
    for (const auto& win : w) {
      // Integer frame overlap of [s, s+64) with [a, b).
      bool hit = false;
      for (const auto& m : moments) {
        const auto a0 = static_cast<std::size_t>(std::lround(m.start_s * v.fps));
        const auto b0 = static_cast<std::size_t>(std::lround(m.end_s * v.fps));
        hit |= win.frame_start < b0 && a0 < win.frame_start + win.frame_len;
      }
      oracle_positives += hit;
    }
    for (const auto* q : ds.queries_for_video(v.id)) {
      const auto dep = label_windows_query_dependent(v.id, w, q->ground_truth, q->id);
      const auto ag = label_windows_query_agnostic(v.id, w, moments);
      for (std::size_t i = 0; i < w.size(); ++i) {
        EXPECT_TRUE(!dep[i].label || ag[i].label);
        dep_positives += dep[i].label;
        ++dep_total;
      }
    }
  }
  EXPECT_EQ(total, 20u * 16u);
  EXPECT_EQ(positives, oracle_positives);
  const double ag_rate = static_cast<double>(positives) / total;
  const double dep_rate = static_cast<double>(dep_positives) / dep_total;
  EXPECT_GT(ag_rate, 0.0);
  EXPECT_LT(ag_rate, 1.0);
  EXPECT_LT(dep_rate, ag_rate);
}

TEST(SyntheticTest, InvalidConfigIsRejected) {
  SyntheticConfig cfg = small_synthetic();
  cfg.moments_per_video = 10;
  cfg.frames_per_video = 100;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_synthetic();
  cfg.noise_scale = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(FeatureStoreTest, MissingAudioIsDataErrorWhenRequired) {
  TempDir dir("no_audio");
  SyntheticConfig cfg = small_synthetic();
  cfg.with_audio = false;
  const auto ds = generate_synthetic(cfg, dir.path());
  EXPECT_NO_THROW(FeatureStore::load(ds, false));
  EXPECT_THROW(FeatureStore::load(ds, true), DataError);
}

TEST(FitRowsTest, PadsAndTruncates) {
  const Matrix m{{1, 2}, {3, 4}, {5, 6}};
  EXPECT_EQ(fit_rows(m, 2), (Matrix{{1, 2}, {3, 4}}));
  EXPECT_EQ(fit_rows(m, 4), (Matrix{{1, 2}, {3, 4}, {5, 6}, {0, 0}}));
}

}  // namespace
}  // namespace guided
