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

#include "guided/guidance.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "config_json.hpp"
#include "guided/errors.hpp"
#include "guided/optim.hpp"
#include "guided/parallel.hpp"
#include "json.hpp"

namespace guided {

namespace {

constexpr double kInitStd = 0.02;
// Batch gradients are summed in this many contiguous groups regardless of
// the thread count.
constexpr std::size_t kGradientGroups = 8;

}  // namespace

std::string_view mode_name(GuidanceMode mode) {
  return mode == GuidanceMode::kQueryDependent ? "dependent" : "agnostic";
}

GuidanceMode parse_mode(std::string_view name) {
  if (name == "dependent" || name == "query-dependent") {
    return GuidanceMode::kQueryDependent;
  }
  if (name == "agnostic" || name == "query-agnostic") {
    return GuidanceMode::kQueryAgnostic;
  }
  throw ConfigError("unknown guidance mode \"" + std::string(name) +
                    "\" (expected agnostic or dependent)");
}

std::size_t GuidanceConfig::sequence_length() const {
  std::size_t n = 1;
  if (modalities.visual) n += window_frames;
  if (modalities.audio) n += window_frames;
  if (modalities.text) n += text_len;
  return n;
}

void GuidanceConfig::validate() const {
  if (mode == GuidanceMode::kQueryDependent && !modalities.text) {
    throw ConfigError("query-dependent guidance requires the text modality");
  }
  if (mode == GuidanceMode::kQueryAgnostic && modalities.text) {
    throw ConfigError("query-agnostic guidance cannot use the text modality");
  }
  if (!modalities.visual && !modalities.audio) {
    throw ConfigError("guidance needs the visual or the audio modality");
  }
  if (model_dim == 0 || layers == 0 || heads == 0 || window_frames == 0) {
    throw ConfigError("guidance model_dim, layers, heads and window_frames "
                      "must be positive");
  }
  if (model_dim % heads != 0) {
    throw ConfigError("guidance model_dim " + std::to_string(model_dim) +
                      " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("guidance dropout must lie in [0, 1)");
  }
  if ((modalities.visual && visual_dim == 0) ||
      (modalities.audio && audio_dim == 0) ||
      (modalities.text && (text_dim == 0 || text_len == 0))) {
    throw ConfigError("guidance input dims must be positive");
  }
}

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0 || threads == 0) {
    throw ConfigError("train epochs, batch_size and threads must be positive");
  }
  if (!(lr > 0.0) || !(weight_decay >= 0.0) || !(positive_weight > 0.0)) {
    throw ConfigError("train lr and positive_weight must be positive, "
                      "weight_decay non-negative");
  }
}

template <typename T>
BasicMatrix<T> sinusoidal_table(std::size_t rows, std::size_t dim) {
  BasicMatrix<T> table(rows, dim);
  for (std::size_t pos = 0; pos < rows; ++pos) {
    for (std::size_t i = 0; i < dim; i += 2) {
      const double freq =
          std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
      const double angle = static_cast<double>(pos) * freq;
      table(pos, i) = static_cast<T>(std::sin(angle));
      if (i + 1 < dim) table(pos, i + 1) = static_cast<T>(std::cos(angle));
    }
  }
  return table;
}

double sigmoid(double logit) {
  double p;
  if (logit >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-logit));
  } else {
    const double e = std::exp(logit);
    p = e / (1.0 + e);
  }
  return std::clamp(p, std::numeric_limits<double>::denorm_min(),
                    std::nextafter(1.0, 0.0));
}

namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

double bce_loss(double logit, bool label, double positive_weight) {
  return label ? positive_weight * softplus(-logit) : softplus(logit);
}

double bce_grad(double logit, bool label, double positive_weight) {
  const double p = 1.0 / (1.0 + std::exp(-logit));
  return label ? positive_weight * (p - 1.0) : p;
}

std::size_t expected_parameter_count(const GuidanceConfig& c) {
  const std::size_t d = c.model_dim;
  const std::size_t f = c.effective_ffn_dim();
  std::size_t n = 0;
  const auto projection = [&](std::size_t in) { return in * d + d + 2 * d; };
  if (c.modalities.visual) n += projection(c.visual_dim);
  if (c.modalities.audio) n += projection(c.audio_dim) + c.window_frames * d;
  if (c.modalities.text) n += projection(c.text_dim) + c.text_len * d;
  n += d;  // CLS
  const std::size_t per_layer =
      4 * (d * d + d) + 2 * (2 * d) + (d * f + f) + (f * d + d);
  n += c.layers * per_layer;
  n += (d * d + d) + (d + 1);
  return n;
}

// ---------------------------------------------------------------------------
// Model

template <typename T>
BasicGuidanceModel<T>::BasicGuidanceModel(GuidanceConfig config)
    : config_(config) {
  config_.validate();
  const std::size_t d = config_.model_dim;
  if (config_.modalities.visual) {
    visual_ = {Linear<T>(config_.visual_dim, d), LayerNorm<T>(d)};
    video_pos_ = sinusoidal_table<T>(config_.window_frames, d);
  }
  if (config_.modalities.audio) {
    audio_ = {Linear<T>(config_.audio_dim, d), LayerNorm<T>(d)};
    audio_pos_ = Parameter<T>(config_.window_frames, d);
  }
  if (config_.modalities.text) {
    text_ = {Linear<T>(config_.text_dim, d), LayerNorm<T>(d)};
    text_pos_ = Parameter<T>(config_.text_len, d);
  }
  cls_ = Parameter<T>(1, d);
  layers_.reserve(config_.layers);
  for (std::size_t i = 0; i < config_.layers; ++i) {
    layers_.emplace_back(d, config_.heads, config_.effective_ffn_dim(),
                         config_.dropout);
  }
  head1_ = Linear<T>(d, d);
  head2_ = Linear<T>(d, 1);
}

template <typename T>
void BasicGuidanceModel<T>::init(std::uint64_t seed) {
  Rng rng(seed);
  if (config_.modalities.visual) {
    visual_.linear.init(rng, kInitStd);
    visual_.norm.init();
  }
  if (config_.modalities.audio) {
    audio_.linear.init(rng, kInitStd);
    audio_.norm.init();
    init_normal(audio_pos_.value, rng, kInitStd);
  }
  if (config_.modalities.text) {
    text_.linear.init(rng, kInitStd);
    text_.norm.init();
    init_normal(text_pos_.value, rng, kInitStd);
  }
  init_normal(cls_.value, rng, kInitStd);
  for (auto& layer : layers_) layer.init(rng, kInitStd);
  head1_.init(rng, kInitStd);
  head2_.init(rng, kInitStd);
  zero_grad();
}

template <typename T>
ParameterList<T> BasicGuidanceModel<T>::parameters() {
  ParameterList<T> out;
  if (config_.modalities.visual) {
    visual_.linear.collect("visual.proj", out);
    visual_.norm.collect("visual.norm", out);
  }
  if (config_.modalities.audio) {
    audio_.linear.collect("audio.proj", out);
    audio_.norm.collect("audio.norm", out);
    out.push_back({"audio.pos", &audio_pos_});
  }
  if (config_.modalities.text) {
    text_.linear.collect("text.proj", out);
    text_.norm.collect("text.norm", out);
    out.push_back({"text.pos", &text_pos_});
  }
  out.push_back({"cls", &cls_});
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect("encoder." + std::to_string(i), out);
  }
  head1_.collect("head.fc1", out);
  head2_.collect("head.fc2", out);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const BasicMatrix<T>*>>
BasicGuidanceModel<T>::named_values() const {
  std::vector<std::pair<std::string, const BasicMatrix<T>*>> out;
  for (const auto& p : const_cast<BasicGuidanceModel*>(this)->parameters()) {
    out.emplace_back(p.name, &p.param->value);
  }
  return out;
}

template <typename T>
std::size_t BasicGuidanceModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, value] : named_values()) n += value->size();
  return n;
}

template <typename T>
void BasicGuidanceModel<T>::zero_grad() {
  for (auto& p : parameters()) p.param->zero_grad();
}

template <typename T>
template <typename U>
void BasicGuidanceModel<T>::copy_values_from(BasicGuidanceModel<U>& other) {
  if (!(other.config() == config_)) {
    throw ConfigError("copy_values_from: model configurations differ");
  }
  auto dst = parameters();
  auto src = other.parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const auto& s = src[i].param->value;
    auto& v = dst[i].param->value;
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = static_cast<T>(s[j]);
  }
}

template <typename T>
BasicMatrix<T> BasicGuidanceModel<T>::project(
    const Projection& proj, const BasicMatrix<T>& x, std::size_t expected_rows,
    const char* name, bool training, Rng& rng,
    ProjectionCache<T>* cache) const {
  if (x.rows() != expected_rows || x.cols() != proj.linear.in_features()) {
    throw DimensionError(std::string(name) + " input is " + x.shape_string() +
                         ", expected (" + std::to_string(expected_rows) + "x" +
                         std::to_string(proj.linear.in_features()) + ")");
  }
  BasicMatrix<T> y = proj.norm.forward(proj.linear.forward(x),
                                       cache ? &cache->norm : nullptr);
  auto dropped = dropout(y, config_.dropout, rng, training);
  if (cache) cache->dropout_mask = std::move(dropped.mask);
  return std::move(dropped.output);
}

template <typename T>
void BasicGuidanceModel<T>::project_backward(Projection& proj,
                                             const BasicMatrix<T>& x,
                                             const BasicMatrix<T>& dy,
                                             const ProjectionCache<T>& cache) {
  const BasicMatrix<T> dnorm = dropout_backward(dy, cache.dropout_mask);
  const BasicMatrix<T> dlinear = proj.norm.backward(dnorm, cache.norm);
  proj.linear.backward(x, dlinear, /*need_input_grad=*/false);
}

template <typename T>
BasicMatrix<T> BasicGuidanceModel<T>::build_input(
    const WindowInputs<T>& inputs, bool training, Rng& rng,
    GuidanceCache<T>* cache) const {
  const ModalityMask& m = config_.modalities;
  const auto check = [](bool enabled, const void* ptr, const char* name) {
    if (enabled && ptr == nullptr) {
      throw ConfigError(std::string("enabled modality ") + name +
                        " has no input");
    }
    if (!enabled && ptr != nullptr) {
      throw ConfigError(std::string("modality ") + name +
                        " is disabled but an input was supplied");
    }
  };
  check(m.visual, inputs.visual, "visual");
  check(m.audio, inputs.audio, "audio");
  check(m.text, inputs.text, "text");

  const std::size_t d = config_.model_dim;
  const std::size_t l = config_.window_frames;
  BasicMatrix<T> e_in(config_.sequence_length(), d);
  assign_rows(e_in, 0, cls_.value);
  std::size_t offset = 1;
  if (m.visual) {
    BasicMatrix<T> v = project(visual_, *inputs.visual, l, "visual", training,
                               rng, cache ? &cache->visual : nullptr);
    add_inplace(v, video_pos_);
    assign_rows(e_in, offset, v);
    offset += l;
  }
  if (m.audio) {
    BasicMatrix<T> a = project(audio_, *inputs.audio, l, "audio", training,
                               rng, cache ? &cache->audio : nullptr);
    add_inplace(a, audio_pos_.value);
    assign_rows(e_in, offset, a);
    offset += l;
  }
  if (m.text) {
    BasicMatrix<T> t = project(text_, *inputs.text, config_.text_len, "text",
                               training, rng, cache ? &cache->text : nullptr);
    add_inplace(t, text_pos_.value);
    assign_rows(e_in, offset, t);
  }
  if (cache) cache->inputs = inputs;
  return e_in;
}

template <typename T>
T BasicGuidanceModel<T>::forward_logit(const BasicMatrix<T>& input,
                                       bool training, Rng& rng,
                                       GuidanceCache<T>* cache) const {
  if (input.cols() != config_.model_dim) {
    throw DimensionError("guidance input " + input.shape_string() +
                         " does not have model_dim columns");
  }
  if (cache) cache->layers.resize(layers_.size());
  BasicMatrix<T> h = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h, training, rng,
                           cache ? &cache->layers[i] : nullptr);
  }
  require_finite(h, "guidance encoder output");
  BasicMatrix<T> cls_out = slice_rows_padded(h, 0, 1);
  BasicMatrix<T> pre = head1_.forward(cls_out);
  BasicMatrix<T> hidden = relu(pre);
  const BasicMatrix<T> out = head2_.forward(hidden);
  const T logit = out(0, 0);
  if (!std::isfinite(logit)) throw NumericError("guidance logit is not finite");
  if (cache) {
    cache->cls_out = std::move(cls_out);
    cache->head_pre = std::move(pre);
    cache->head_hidden = std::move(hidden);
  }
  return logit;
}

template <typename T>
T BasicGuidanceModel<T>::logit(const WindowInputs<T>& inputs, bool training,
                               Rng& rng, GuidanceCache<T>* cache) const {
  return forward_logit(build_input(inputs, training, rng, cache), training, rng,
                       cache);
}

template <typename T>
double BasicGuidanceModel<T>::probability(const WindowInputs<T>& inputs) const {
  Rng unused(0);
  return sigmoid(static_cast<double>(logit(inputs, false, unused)));
}

template <typename T>
void BasicGuidanceModel<T>::backward(T dlogit, const GuidanceCache<T>& cache) {
  const std::size_t d = config_.model_dim;
  BasicMatrix<T> dout(1, 1, dlogit);
  BasicMatrix<T> dhidden = head2_.backward(cache.head_hidden, dout);
  for (std::size_t i = 0; i < dhidden.size(); ++i) {
    if (cache.head_pre[i] <= T(0)) dhidden[i] = T(0);
  }
  const BasicMatrix<T> dcls = head1_.backward(cache.cls_out, dhidden);

  BasicMatrix<T> dh(config_.sequence_length(), d);
  assign_rows(dh, 0, dcls);
  for (std::size_t i = layers_.size(); i-- > 0;) {
    dh = layers_[i].backward(dh, cache.layers[i]);
  }

  for (std::size_t c = 0; c < d; ++c) cls_.grad[c] += dh(0, c);
  const ModalityMask& m = config_.modalities;
  const std::size_t l = config_.window_frames;
  std::size_t offset = 1;
  if (m.visual) {
    project_backward(visual_, *cache.inputs.visual,
                     slice_rows_padded(dh, offset, l), cache.visual);
    offset += l;
  }
  if (m.audio) {
    const BasicMatrix<T> da = slice_rows_padded(dh, offset, l);
    add_inplace(audio_pos_.grad, da);
    project_backward(audio_, *cache.inputs.audio, da, cache.audio);
    offset += l;
  }
  if (m.text) {
    const BasicMatrix<T> dt = slice_rows_padded(dh, offset, config_.text_len);
    add_inplace(text_pos_.grad, dt);
    project_backward(text_, *cache.inputs.text, dt, cache.text);
  }
}

template class BasicGuidanceModel<float>;
template class BasicGuidanceModel<double>;
template void BasicGuidanceModel<float>::copy_values_from(
    BasicGuidanceModel<float>&);
template void BasicGuidanceModel<double>::copy_values_from(
    BasicGuidanceModel<float>&);
template void BasicGuidanceModel<double>::copy_values_from(
    BasicGuidanceModel<double>&);
template void BasicGuidanceModel<float>::copy_values_from(
    BasicGuidanceModel<double>&);
template BasicMatrix<float> sinusoidal_table(std::size_t, std::size_t);
template BasicMatrix<double> sinusoidal_table(std::size_t, std::size_t);

// ---------------------------------------------------------------------------
// Training

std::vector<TrainingSample> make_samples(std::span<const LabeledWindow> labeled,
                                         const FeatureStore& features,
                                         const GuidanceConfig& config) {
  std::vector<TrainingSample> out;
  out.reserve(labeled.size());
  for (const LabeledWindow& lw : labeled) {
    const VideoFeatures& vf = features.video(lw.video_id);
    TrainingSample s;
    s.frame_start = lw.window.frame_start;
    s.label = lw.label;
    if (config.modalities.visual) s.visual = &vf.visual;
    if (config.modalities.audio) {
      if (!vf.audio) {
        throw DataError("video " + lw.video_id +
                        " has no audio features but the audio modality is "
                        "enabled");
      }
      s.audio = &*vf.audio;
    }
    if (config.modalities.text) {
      if (!lw.query_id) {
        throw DataError("query-dependent sample for video " + lw.video_id +
                        " has no query id");
      }
      s.tokens = &features.tokens(*lw.query_id);
    }
    out.push_back(s);
  }
  return out;
}

WindowInputs<float> SampleInputs::view(const GuidanceConfig& config) const {
  WindowInputs<float> in;
  if (config.modalities.visual) in.visual = &visual;
  if (config.modalities.audio) in.audio = &audio;
  if (config.modalities.text) in.text = &text;
  return in;
}

SampleInputs slice_sample(const TrainingSample& sample,
                          const GuidanceConfig& config) {
  SampleInputs in;
  if (config.modalities.visual) {
    if (!sample.visual) throw DataError("sample has no visual features");
    in.visual =
        slice_rows_padded(*sample.visual, sample.frame_start, config.window_frames);
  }
  if (config.modalities.audio) {
    if (!sample.audio) throw DataError("sample has no audio features");
    in.audio =
        slice_rows_padded(*sample.audio, sample.frame_start, config.window_frames);
  }
  if (config.modalities.text) {
    if (!sample.tokens) throw DataError("sample has no query tokens");
    in.text = fit_rows(*sample.tokens, config.text_len);
  }
  return in;
}

namespace {

enum StreamId : std::uint64_t { kShuffleStream = 11, kDropoutStream = 12 };

void add_gradients(ParameterList<float>& acc, const ParameterList<float>& src) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    add_inplace(acc[i].param->grad, src[i].param->grad);
  }
}

}  // namespace

double evaluate_loss(const GuidanceModel& model,
                     std::span<const TrainingSample> samples,
                     std::size_t threads) {
  if (samples.empty()) return 0.0;
  const GuidanceConfig& cfg = model.config();
  std::vector<double> losses(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const SampleInputs in = slice_sample(samples[i], cfg);
    Rng unused(0);
    const double z = model.logit(in.view(cfg), false, unused);
    losses[i] = bce_loss(z, samples[i].label);
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) /
         static_cast<double>(losses.size());
}

TrainResult train_guidance(std::span<const TrainingSample> train,
                           const GuidanceConfig& gcfg, const TrainConfig& tcfg,
                           std::span<const TrainingSample> validation) {
  gcfg.validate();
  tcfg.validate();
  const auto positives = std::count_if(train.begin(), train.end(),
                                       [](const auto& s) { return s.label; });
  if (positives == 0 || static_cast<std::size_t>(positives) == train.size()) {
    throw ConfigError("training set needs at least one positive and one "
                      "negative window (found " +
                      std::to_string(positives) + " positives of " +
                      std::to_string(train.size()) + ")");
  }

  TrainResult result{GuidanceModel(gcfg), {}};
  GuidanceModel& model = result.model;
  model.init(derive_seed(tcfg.seed, {0}));
  ParameterList<float> master = model.parameters();
  AdamW<float> optimizer(master, {.lr = tcfg.lr,
                                  .weight_decay = tcfg.weight_decay});

  const std::size_t workers = std::min(tcfg.threads, kGradientGroups);
  std::vector<GuidanceModel> replicas(workers, GuidanceModel(gcfg));
  std::vector<ParameterList<float>> replica_params;
  for (auto& r : replicas) replica_params.push_back(r.parameters());
  // Per-group gradient copies, needed only when groups run concurrently.
  std::vector<std::vector<Matrix>> group_grads;
  if (workers > 1) {
    group_grads.resize(kGradientGroups);
    for (auto& g : group_grads) {
      for (const auto& p : master) g.emplace_back(p.param->grad.rows(), p.param->grad.cols());
    }
  }

  Rng shuffle_rng(derive_seed(tcfg.seed, {kShuffleStream}));
  std::vector<std::size_t> order(train.size());
  std::vector<double> losses(train.size());

  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, shuffle_rng);

    for (std::size_t begin = 0; begin < order.size(); begin += tcfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + tcfg.batch_size);
      const std::size_t batch = end - begin;
      const std::size_t groups = std::min(kGradientGroups, batch);
      const auto scale = static_cast<float>(1.0 / static_cast<double>(batch));

      const auto run_group = [&](std::size_t group, std::size_t worker) {
        GuidanceModel& replica = replicas[worker];
        replica.copy_values_from(model);
        replica.zero_grad();
        const std::size_t g_begin = begin + group * batch / groups;
        const std::size_t g_end = begin + (group + 1) * batch / groups;
        for (std::size_t pos = g_begin; pos < g_end; ++pos) {
          const TrainingSample& sample = train[order[pos]];
          const SampleInputs in = slice_sample(sample, gcfg);
          Rng rng(derive_seed(tcfg.seed, {kDropoutStream, epoch, pos}));
          GuidanceCache<float> cache;
          const float z = replica.logit(in.view(gcfg), true, rng, &cache);
          losses[pos] = bce_loss(z, sample.label, tcfg.positive_weight);
          const auto dz = static_cast<float>(
              bce_grad(z, sample.label, tcfg.positive_weight));
          replica.backward(dz * scale, cache);
        }
      };

      for (auto& p : master) p.param->zero_grad();
      if (workers <= 1) {
        for (std::size_t g = 0; g < groups; ++g) {
          run_group(g, 0);
          add_gradients(master, replica_params[0]);
        }
      } else {
        parallel_for(workers, workers, [&](std::size_t w) {
          for (std::size_t g = w; g < groups; g += workers) {
            run_group(g, w);
            for (std::size_t i = 0; i < master.size(); ++i) {
              group_grads[g][i] = replica_params[w][i].param->grad;
            }
          }
        });
        for (std::size_t g = 0; g < groups; ++g) {
          for (std::size_t i = 0; i < master.size(); ++i) {
            add_inplace(master[i].param->grad, group_grads[g][i]);
          }
        }
      }
      for (const auto& p : master) {
        if (!all_finite(p.param->grad)) {
          throw NumericError("non-finite gradient in " + p.name + " at epoch " +
                             std::to_string(epoch + 1) + ", batch starting " +
                             std::to_string(begin));
        }
      }
      optimizer.step();
    }

    const double mean =
        std::accumulate(losses.begin(), losses.end(), 0.0) /
        static_cast<double>(losses.size());
    if (!std::isfinite(mean)) {
      throw NumericError("training loss diverged at epoch " +
                         std::to_string(epoch + 1));
    }
    result.epoch_loss.push_back(mean);
    if (tcfg.eval_every > 0 && !validation.empty() &&
        (epoch + 1) % tcfg.eval_every == 0) {
      std::cerr << "epoch " << epoch + 1 << " train_loss " << mean
                << " val_loss " << evaluate_loss(model, validation, tcfg.threads)
                << "\n";
    }
  }
  model.zero_grad();
  return result;
}

// ---------------------------------------------------------------------------
// Scoring

std::vector<WindowScore> score_windows(const GuidanceModel& model,
                                       const VideoFeatures& video,
                                       const Matrix* tokens,
                                       std::span<const Window> windows,
                                       std::size_t threads,
                                       ScoringStats* stats) {
  const GuidanceConfig& cfg = model.config();
  if (cfg.modalities.text && tokens == nullptr) {
    throw UsageError("query-dependent guidance needs query tokens");
  }
  if (!cfg.modalities.text && tokens != nullptr) {
    throw UsageError("query-agnostic guidance does not take a query");
  }
  if (cfg.modalities.audio && !video.audio) {
    throw DataError("audio modality enabled but the video has no audio "
                    "features");
  }
  TrainingSample base;
  if (cfg.modalities.visual) base.visual = &video.visual;
  if (cfg.modalities.audio) base.audio = &*video.audio;
  base.tokens = tokens;

  std::vector<WindowScore> out(windows.size());
  parallel_for(windows.size(), threads, [&](std::size_t i) {
    TrainingSample s = base;
    s.frame_start = windows[i].frame_start;
    const SampleInputs in = slice_sample(s, cfg);
    out[i] = {windows[i].index, model.probability(in.view(cfg))};
    if (stats) stats->forward_passes.fetch_add(1, std::memory_order_relaxed);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kModelMagic[4] = {'G', 'M', 'D', 'L'};

}  // namespace

std::string serialize_model(const GuidanceModel& model) {
  nlohmann::json header;
  header["format"] = "guided-grounding-model";
  header["version"] = 1;
  header["config"] = detail::to_json(model.config());
  nlohmann::json manifest = nlohmann::json::array();
  const auto values = model.named_values();
  for (const auto& [name, value] : values) {
    manifest.push_back(
        {{"name", name}, {"rows", value->rows()}, {"cols", value->cols()}});
  }
  header["tensors"] = std::move(manifest);
  const std::string header_text = header.dump();

  std::ostringstream os(std::ios::binary);
  os.write(kModelMagic, 4);
  const auto len = static_cast<std::uint32_t>(header_text.size());
  const char len_bytes[4] = {static_cast<char>(len & 0xff),
                             static_cast<char>((len >> 8) & 0xff),
                             static_cast<char>((len >> 16) & 0xff),
                             static_cast<char>((len >> 24) & 0xff)};
  os.write(len_bytes, 4);
  os.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const auto& [name, value] : values) write_emb1(os, *value);
  return os.str();
}

GuidanceModel deserialize_model(std::string_view bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
    throw FormatError("model file: bad magic (expected \"GMDL\")");
  }
  const auto* u = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t len = static_cast<std::uint32_t>(u[4]) |
                            (static_cast<std::uint32_t>(u[5]) << 8) |
                            (static_cast<std::uint32_t>(u[6]) << 16) |
                            (static_cast<std::uint32_t>(u[7]) << 24);
  if (bytes.size() < 8 + static_cast<std::size_t>(len)) {
    throw FormatError("model file: truncated header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(8, len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file header: ") + e.what());
  }
  if (!header.contains("config") || !header.contains("tensors")) {
    throw FormatError("model file header: missing config or tensors");
  }
  GuidanceModel model(detail::guidance_config_from_json(header["config"]));
  auto params = model.parameters();
  const auto& manifest = header["tensors"];
  if (!manifest.is_array() || manifest.size() != params.size()) {
    throw FormatError("model file: tensor manifest does not match the "
                      "configuration");
  }
  std::istringstream is(std::string(bytes.substr(8 + len)), std::ios::binary);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& entry = manifest[i];
    if (entry.value("name", std::string()) != params[i].name) {
      throw FormatError("model file: expected tensor " + params[i].name);
    }
    Matrix m = read_emb1(is, "model tensor " + params[i].name);
    if (!m.same_shape(params[i].param->value)) {
      throw FormatError("model file: tensor " + params[i].name + " has shape " +
                        m.shape_string() + ", expected " +
                        params[i].param->value.shape_string());
    }
    params[i].param->value = std::move(m);
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError("model file: trailing bytes after the last tensor");
  }
  model.zero_grad();
  return model;
}

void save_model(const GuidanceModel& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

GuidanceModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace guided
