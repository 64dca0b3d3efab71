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

#ifndef GUIDED_GUIDANCE_HPP_
#define GUIDED_GUIDANCE_HPP_

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "guided/dataset.hpp"
#include "guided/layers.hpp"
#include "guided/rng.hpp"
#include "guided/temporal.hpp"
#include "guided/tensor.hpp"

namespace guided {

enum class GuidanceMode { kQueryAgnostic, kQueryDependent };

std::string_view mode_name(GuidanceMode mode);
GuidanceMode parse_mode(std::string_view name);

struct ModalityMask {
  bool visual = true;
  bool audio = true;
  bool text = false;

  bool operator==(const ModalityMask&) const = default;
};

struct GuidanceConfig {
  std::size_t model_dim = 256;     // d_g
  std::size_t layers = 6;          // L_t
  std::size_t heads = 8;
  std::size_t ffn_dim = 0;         // 0 means 4 * model_dim
  double dropout = 0.1;
  std::size_t window_frames = 64;  // L_vg (= L_ag)
  ModalityMask modalities;
  GuidanceMode mode = GuidanceMode::kQueryAgnostic;
  // Input widths and query length, taken from the dataset.
  std::size_t visual_dim = 512;
  std::size_t audio_dim = 512;
  std::size_t text_dim = 512;
  std::size_t text_len = 4;

  std::size_t effective_ffn_dim() const {
    return ffn_dim ? ffn_dim : 4 * model_dim;
  }
  // Rows of E_in: 1 + enabled modality lengths.
  std::size_t sequence_length() const;
  // Throws ConfigError on any inconsistency (mode vs text, no audio-visual
  // modality, head divisibility, zero sizes, dropout outside [0, 1)).
  void validate() const;

  bool operator==(const GuidanceConfig&) const = default;
};

struct TrainConfig {
  std::size_t epochs = 30;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  // Validation loss is logged every `eval_every` epochs when a validation
  // set is given; 0 disables.
  std::size_t eval_every = 0;
  double positive_weight = 1.0;
  std::size_t threads = 1;
  // Stride of the training windows in frames; 0 keeps the scoring stride
  // (window_frames / 2). Denser strides add shifted copies of each window.
  std::size_t window_stride = 0;

  void validate() const;
};

// Per-window inputs for one modality set. Pointers are null for disabled
// modalities.
template <typename T>
struct WindowInputs {
  const BasicMatrix<T>* visual = nullptr;  // L_vg x D_v
  const BasicMatrix<T>* audio = nullptr;   // L_vg x D_a
  const BasicMatrix<T>* text = nullptr;    // L_tg x D_t
};

template <typename T>
struct ProjectionCache {
  LayerNormCache<T> norm;
  BasicMatrix<T> dropout_mask;
};

template <typename T>
struct GuidanceCache {
  WindowInputs<T> inputs;
  ProjectionCache<T> visual, audio, text;
  std::vector<EncoderLayerCache<T>> layers;
  BasicMatrix<T> cls_out;         // 1 x d_g
  BasicMatrix<T> head_pre;        // 1 x d_g
  BasicMatrix<T> head_hidden;     // 1 x d_g
};

// The describable-window classifier: modality projections (linear +
// layer norm + dropout) with positional tables, a CLS token, a post-norm
// transformer encoder and an MLP head on the CLS output.
template <typename T>
class BasicGuidanceModel {
 public:
  explicit BasicGuidanceModel(GuidanceConfig config);

  // Weights ~ N(0, 0.02), biases 0, norms identity, learnable positional
  // tables and CLS ~ N(0, 0.02).
  void init(std::uint64_t seed);

  const GuidanceConfig& config() const { return config_; }

  // Every learnable tensor in a fixed order. The sinusoidal video table is
  // not among them.
  ParameterList<T> parameters();
  std::vector<std::pair<std::string, const BasicMatrix<T>*>> named_values()
      const;
  std::size_t parameter_count() const;
  void zero_grad();
  // Copies parameter values from a model with the same configuration.
  template <typename U>
  void copy_values_from(BasicGuidanceModel<U>& other);

  const BasicMatrix<T>& video_positions() const { return video_pos_; }

  // E_in = [CLS; video; audio; text]. Throws ConfigError when an enabled
  // modality is missing or a disabled one is supplied, DimensionError on
  // wrong shapes.
  BasicMatrix<T> build_input(const WindowInputs<T>& inputs, bool training,
                             Rng& rng, GuidanceCache<T>* cache = nullptr) const;

  // Encoder + head on E_in; returns the logit. Throws NumericError on
  // non-finite intermediates.
  T forward_logit(const BasicMatrix<T>& input, bool training, Rng& rng,
                  GuidanceCache<T>* cache = nullptr) const;

  // build_input + forward_logit.
  T logit(const WindowInputs<T>& inputs, bool training, Rng& rng,
          GuidanceCache<T>* cache = nullptr) const;

  // p* = sigmoid(logit), strictly inside (0, 1); inference mode.
  double probability(const WindowInputs<T>& inputs) const;

  // Accumulates dL/dθ given dL/dlogit for a cached forward pass.
  void backward(T dlogit, const GuidanceCache<T>& cache);

 private:
  struct Projection {
    Linear<T> linear;
    LayerNorm<T> norm;
  };

  BasicMatrix<T> project(const Projection& proj, const BasicMatrix<T>& x,
                         std::size_t expected_rows, const char* name,
                         bool training, Rng& rng,
                         ProjectionCache<T>* cache) const;
  void project_backward(Projection& proj, const BasicMatrix<T>& x,
                        const BasicMatrix<T>& dy,
                        const ProjectionCache<T>& cache);

  GuidanceConfig config_;
  Projection visual_, audio_, text_;
  BasicMatrix<T> video_pos_;  // fixed sinusoidal table
  Parameter<T> audio_pos_;
  Parameter<T> text_pos_;
  Parameter<T> cls_;
  std::vector<EncoderLayer<T>> layers_;
  Linear<T> head1_;
  Linear<T> head2_;

  template <typename U>
  friend class BasicGuidanceModel;
};

using GuidanceModel = BasicGuidanceModel<float>;

// Closed-form parameter count for a configuration.
std::size_t expected_parameter_count(const GuidanceConfig& config);

// Standard sinusoidal table (base 10000) for positions [0, rows).
template <typename T>
BasicMatrix<T> sinusoidal_table(std::size_t rows, std::size_t dim);

double sigmoid(double logit);

// Binary cross-entropy from the logit, in the stable softplus form. With
// positive_weight w: w*y*softplus(-z) + (1-y)*softplus(z).
double bce_loss(double logit, bool label, double positive_weight = 1.0);
// dL/dlogit of bce_loss: w*y*(p-1) + (1-y)*p.
double bce_grad(double logit, bool label, double positive_weight = 1.0);

// ---------------------------------------------------------------------------
// Training

// One labeled window with its source features (not owned).
struct TrainingSample {
  const Matrix* visual = nullptr;  // whole-video features
  const Matrix* audio = nullptr;
  const Matrix* tokens = nullptr;  // L_tg x D_t, dependent mode only
  std::size_t frame_start = 0;
  bool label = false;
};

// Resolves labeled windows against loaded features for the config's
// modalities. Throws DataError when an enabled modality has no features.
std::vector<TrainingSample> make_samples(std::span<const LabeledWindow> labeled,
                                         const FeatureStore& features,
                                         const GuidanceConfig& config);

// Window inputs sliced (zero-padded) out of a sample.
struct SampleInputs {
  Matrix visual, audio, text;
  WindowInputs<float> view(const GuidanceConfig& config) const;
};
SampleInputs slice_sample(const TrainingSample& sample,
                          const GuidanceConfig& config);

struct TrainResult {
  GuidanceModel model;
  std::vector<double> epoch_loss;  // mean training loss per epoch
};

// Mini-batch AdamW over seeded shuffles. Gradients of a batch are summed in
// fixed groups and reduced in group order, so the result is identical for
// every thread count. Throws ConfigError for single-class training sets.
TrainResult train_guidance(std::span<const TrainingSample> train,
                           const GuidanceConfig& gcfg, const TrainConfig& tcfg,
                           std::span<const TrainingSample> validation = {});

// Mean BCE of the model over samples (inference mode).
double evaluate_loss(const GuidanceModel& model,
                     std::span<const TrainingSample> samples,
                     std::size_t threads = 1);

// ---------------------------------------------------------------------------
// Scoring

struct ScoringStats {
  std::atomic<std::uint64_t> forward_passes{0};
};

struct WindowScore {
  std::size_t window = 0;  // Window::index
  double probability = 0.0;
};

// One p* per window, dropout off. `tokens` must be given iff the model is
// query-dependent.
std::vector<WindowScore> score_windows(const GuidanceModel& model,
                                       const VideoFeatures& video,
                                       const Matrix* tokens,
                                       std::span<const Window> windows,
                                       std::size_t threads = 1,
                                       ScoringStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Serialization: "GMDL", u32 LE header length, JSON header (config and
// tensor manifest), then one EMB1 block per tensor in manifest order.

std::string serialize_model(const GuidanceModel& model);
GuidanceModel deserialize_model(std::string_view bytes);
void save_model(const GuidanceModel& model, const std::filesystem::path& path);
GuidanceModel load_model(const std::filesystem::path& path);

}  // namespace guided

#endif  // GUIDED_GUIDANCE_HPP_
