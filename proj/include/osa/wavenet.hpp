// osa/wavenet.hpp

// Copyright 2026 osa-vocoder authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Speaker-aware WaveNet. The frame-level condition (acoustic features, plus
// the utterance d-vector in OSA mode) passes through a 1x1 convolution and a
// stack of dilated convolutions, is repeated over the samples of each frame,
// and is projected into the filter and gate pre-activations of every
// residual layer. The previous mu-law sample enters as a learned embedding.

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "osa/audio_io.hpp"
#include "osa/config_map.hpp"
#include "osa/error.hpp"
#include "osa/features.hpp"
#include "osa/nn/checkpoint.hpp"
#include "osa/nn/ops.hpp"
#include "osa/nn/parameters.hpp"

namespace osa {

enum class VocoderMode { kSpeakerIndependent, kSpeakerAware };

inline std::string ModeName(VocoderMode m) { return m == VocoderMode::kSpeakerAware ? "OSA" : "SI"; }

inline VocoderMode ParseMode(const std::string &s) {
  if (s == "OSA" || s == "osa") return VocoderMode::kSpeakerAware;
  if (s == "SI" || s == "si") return VocoderMode::kSpeakerIndependent;
  Fail(ErrorCode::kInvalidArgument, "unknown vocoder mode '" + s + "' (expected SI or OSA)");
}

struct WaveNetConfig {
  int blocks = 4;
  int layers_per_block = 10;
  int filter_width = 2;
  int residual_channels = 100;
  int gate_channels = 100;
  int skip_channels = 256;
  int quantization_classes = kMulawClasses;
  int condition_channels = 80;
  int condition_filter = 3;
  int condition_layers = 4;
  int frame_shift = kFrameShift;
  int feature_dim = kFeatureDim;
  int embedding_dim = 256;
  VocoderMode mode = VocoderMode::kSpeakerAware;

  /// Width of the per-frame condition before the condition network.
  int condition_input_dim() const {
    return feature_dim + (mode == VocoderMode::kSpeakerAware ? embedding_dim : 0);
  }
  int num_layers() const { return blocks * layers_per_block; }
  int Dilation(int layer) const { return 1 << (layer % layers_per_block); }
  int ConditionDilation(int layer) const { return 1 << layer; }

  /// Number of past samples that can influence one prediction.
  int64_t ReceptiveField() const {
    int64_t sum = 0;
    for (int l = 0; l < num_layers(); ++l) sum += Dilation(l);
    return (filter_width - 1) * sum + 1;
  }

  StringMap ToMeta() const {
    return {{"model", "wavenet"},
            {"wavenet.mode", ModeName(mode)},
            {"wavenet.blocks", std::to_string(blocks)},
            {"wavenet.layers_per_block", std::to_string(layers_per_block)},
            {"wavenet.filter_width", std::to_string(filter_width)},
            {"wavenet.residual_channels", std::to_string(residual_channels)},
            {"wavenet.gate_channels", std::to_string(gate_channels)},
            {"wavenet.skip_channels", std::to_string(skip_channels)},
            {"wavenet.quantization_classes", std::to_string(quantization_classes)},
            {"wavenet.condition_channels", std::to_string(condition_channels)},
            {"wavenet.condition_filter", std::to_string(condition_filter)},
            {"wavenet.condition_layers", std::to_string(condition_layers)},
            {"wavenet.frame_shift", std::to_string(frame_shift)},
            {"wavenet.feature_dim", std::to_string(feature_dim)},
            {"wavenet.embedding_dim", std::to_string(embedding_dim)}};
  }

  static WaveNetConfig FromMeta(const StringMap &meta) {
    Require(MetaValue(meta, "model") == "wavenet", ErrorCode::kIncompatibleCheckpoint,
            "checkpoint is not a WaveNet vocoder (model=" + MetaValue(meta, "model") + ")");
    const auto get = [&](const char *k) { return std::stoi(MetaValue(meta, k)); };
    WaveNetConfig c;
    c.mode = ParseMode(MetaValue(meta, "wavenet.mode"));
    c.blocks = get("wavenet.blocks");
    c.layers_per_block = get("wavenet.layers_per_block");
    c.filter_width = get("wavenet.filter_width");
    c.residual_channels = get("wavenet.residual_channels");
    c.gate_channels = get("wavenet.gate_channels");
    c.skip_channels = get("wavenet.skip_channels");
    c.quantization_classes = get("wavenet.quantization_classes");
    c.condition_channels = get("wavenet.condition_channels");
    c.condition_filter = get("wavenet.condition_filter");
    c.condition_layers = get("wavenet.condition_layers");
    c.frame_shift = get("wavenet.frame_shift");
    c.feature_dim = get("wavenet.feature_dim");
    c.embedding_dim = get("wavenet.embedding_dim");
    return c;
  }
};

/// Concatenates normalized features with the utterance embedding on every
/// frame (OSA), or passes the features through unchanged (SI).
inline RowMatrix<float> ConditionInput(const WaveNetConfig &cfg, const RowMatrix<float> &features,
                                       std::span<const float> embedding) {
  Require(features.cols() == cfg.feature_dim, ErrorCode::kShapeMismatch,
          "condition: feature dim " + std::to_string(features.cols()) + ", expected " +
              std::to_string(cfg.feature_dim));
  if (cfg.mode == VocoderMode::kSpeakerIndependent) return features;
  Require(static_cast<int>(embedding.size()) == cfg.embedding_dim, ErrorCode::kShapeMismatch,
          "condition: embedding dim " + std::to_string(embedding.size()) + ", expected " +
              std::to_string(cfg.embedding_dim));
  RowMatrix<float> out(features.rows(), cfg.condition_input_dim());
  out.leftCols(cfg.feature_dim) = features;
  for (Index k = 0; k < features.rows(); ++k)
    for (int d = 0; d < cfg.embedding_dim; ++d) out(k, cfg.feature_dim + d) = embedding[d];
  return out;
}

/// Previous-sample inputs for teacher forcing: index 128 precedes sample 0.
inline std::vector<int> ShiftRight(std::span<const int> x) {
  std::vector<int> prev(x.size());
  for (size_t t = 0; t < x.size(); ++t) prev[t] = t == 0 ? kMulawMidpoint : x[t - 1];
  return prev;
}

template <typename S>
class WaveNet {
 public:
  struct Layer {
    nn::Tensor<S> conv_kernel;  // [filter_width, R, 2G]; columns [0,G) filter, [G,2G) gate
    nn::Tensor<S> conv_bias;    // [2G]
    nn::Tensor<S> cond_weight;  // [C, 2G]
    nn::Tensor<S> skip_weight;  // [G, S]
    nn::Tensor<S> skip_bias;
    nn::Tensor<S> res_weight;  // [G, R]
    nn::Tensor<S> res_bias;
    int dilation = 1;
  };

  explicit WaveNet(const WaveNetConfig &cfg, uint64_t seed = 0) : cfg_(cfg) {
    Require(cfg.filter_width == 2, ErrorCode::kInvalidArgument, "residual stack supports filter width 2");
    Require(cfg.blocks >= 1 && cfg.layers_per_block >= 1 && cfg.condition_layers >= 0, ErrorCode::kInvalidArgument,
            "wavenet: bad layer counts");
    std::mt19937_64 rng(seed);
    const Index R = cfg.residual_channels, G = cfg.gate_channels, Sk = cfg.skip_channels;
    const Index Q = cfg.quantization_classes, C = cfg.condition_channels, Din = cfg.condition_input_dim();

    input_table_ = Add("input.table", {Q, R}, Q, rng);
    input_bias_ = store_.Add("input.bias", {R});
    cond_in_w_ = Add("cond.in.weight", {Din, C}, Din, rng);
    cond_in_b_ = store_.Add("cond.in.bias", {C});
    for (int i = 0; i < cfg.condition_layers; ++i) {
      const std::string p = "cond.conv" + std::to_string(i) + ".";
      cond_kernels_.push_back(Add(p + "kernel", {cfg.condition_filter, C, C}, cfg.condition_filter * C, rng));
      cond_biases_.push_back(store_.Add(p + "bias", {C}));
    }
    for (int l = 0; l < cfg.num_layers(); ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      Layer layer;
      layer.dilation = cfg.Dilation(l);
      layer.conv_kernel = Add(p + "conv.kernel", {cfg.filter_width, R, 2 * G}, cfg.filter_width * R, rng);
      layer.conv_bias = store_.Add(p + "conv.bias", {2 * G});
      layer.cond_weight = Add(p + "cond.weight", {C, 2 * G}, C, rng);
      layer.skip_weight = Add(p + "skip.weight", {G, Sk}, G, rng);
      layer.skip_bias = store_.Add(p + "skip.bias", {Sk});
      layer.res_weight = Add(p + "res.weight", {G, R}, G, rng);
      layer.res_bias = store_.Add(p + "res.bias", {R});
      layers_.push_back(layer);
    }
    post1_w_ = Add("post1.weight", {Sk, Sk}, Sk, rng);
    post1_b_ = store_.Add("post1.bias", {Sk});
    post2_w_ = Add("post2.weight", {Sk, Q}, Sk, rng);
    post2_b_ = store_.Add("post2.bias", {Q});
  }

  const WaveNetConfig &config() const { return cfg_; }
  nn::ParameterStore<S> &store() { return store_; }
  const nn::ParameterStore<S> &store() const { return store_; }
  const std::vector<Layer> &layers() const { return layers_; }

  /// Condition network on frame-level input [F x Din]; returns [F x C].
  nn::Tensor<S> ConditionFrames(nn::Tape<S> &tape, const RowMatrix<float> &cond_input) const {
    Require(cond_input.cols() == cfg_.condition_input_dim(), ErrorCode::kShapeMismatch,
            "condition width " + std::to_string(cond_input.cols()) + " does not match " + ModeName(cfg_.mode) +
                " model width " + std::to_string(cfg_.condition_input_dim()));
    auto x = nn::Tensor<S>::FromMatrix(cond_input.template cast<S>());
    auto h = nn::Linear(tape, x, cond_in_w_, cond_in_b_);
    for (size_t i = 0; i < cond_kernels_.size(); ++i) {
      h = nn::Tanh(tape, h);
      h = nn::Conv1d(tape, h, cond_kernels_[i], cond_biases_[i], cfg_.ConditionDilation(static_cast<int>(i)),
                     nn::Padding::kSame);
    }
    return h;
  }

  /// Sample-rate condition: each frame's vector repeated frame_shift times.
  nn::Tensor<S> BuildCondition(nn::Tape<S> &tape, const RowMatrix<float> &cond_input) const {
    return nn::RepeatRows(tape, ConditionFrames(tape, cond_input), cfg_.frame_shift);
  }

  /// Logits for every position given the previous-sample indices and the
  /// sample-rate condition rows. Row t depends on prev[<=t] and cond[<=t].
  nn::Tensor<S> Logits(nn::Tape<S> &tape, std::span<const int> prev, const nn::Tensor<S> &cond) const {
    Require(cond.rows() == static_cast<Index>(prev.size()), ErrorCode::kLengthMismatch,
            "condition rows " + std::to_string(cond.rows()) + " != samples " + std::to_string(prev.size()));
    Require(cond.cols() == cfg_.condition_channels, ErrorCode::kShapeMismatch, "condition channel count");
    const Index G = cfg_.gate_channels;
    auto h = nn::Embedding(tape, prev, input_table_, input_bias_);
    nn::Tensor<S> skip;
    for (size_t l = 0; l < layers_.size(); ++l) {
      const auto &L = layers_[l];
      auto pre = nn::Add(tape, nn::Conv1d(tape, h, L.conv_kernel, L.conv_bias, L.dilation),
                         nn::Linear(tape, cond, L.cond_weight));
      auto z = nn::GatedActivation(tape, nn::SliceCols(tape, pre, 0, G), nn::SliceCols(tape, pre, G, G));
      auto s = nn::Linear(tape, z, L.skip_weight, L.skip_bias);
      skip = skip.defined() ? nn::Add(tape, skip, s) : s;
      if (l + 1 < layers_.size()) h = nn::Add(tape, h, nn::Linear(tape, z, L.res_weight, L.res_bias));
    }
    auto out = nn::Relu(tape, skip);
    out = nn::Relu(tape, nn::Linear(tape, out, post1_w_, post1_b_));
    return nn::Linear(tape, out, post2_w_, post2_b_);
  }

  /// Teacher-forced logits for a quantized sequence x with its condition.
  nn::Tensor<S> TeacherForced(nn::Tape<S> &tape, std::span<const int> x, const nn::Tensor<S> &cond) const {
    const auto prev = ShiftRight(x);
    return Logits(tape, prev, cond);
  }

  // Raw parameter access for the incremental generator.
  const nn::Tensor<S> &input_table() const { return input_table_; }
  const nn::Tensor<S> &input_bias() const { return input_bias_; }
  const nn::Tensor<S> &post1_weight() const { return post1_w_; }
  const nn::Tensor<S> &post1_bias() const { return post1_b_; }
  const nn::Tensor<S> &post2_weight() const { return post2_w_; }
  const nn::Tensor<S> &post2_bias() const { return post2_b_; }

 private:
  nn::Tensor<S> Add(const std::string &name, const nn::Shape &shape, Index fan_in, std::mt19937_64 &rng) {
    auto t = store_.Add(name, shape);
    nn::InitFanIn(t, fan_in, rng);
    return t;
  }

  WaveNetConfig cfg_;
  nn::ParameterStore<S> store_;
  nn::Tensor<S> input_table_, input_bias_;
  nn::Tensor<S> cond_in_w_, cond_in_b_;
  std::vector<nn::Tensor<S>> cond_kernels_, cond_biases_;
  std::vector<Layer> layers_;
  nn::Tensor<S> post1_w_, post1_b_, post2_w_, post2_b_;
};

template <typename S>
nn::Checkpoint VocoderCheckpoint(const WaveNet<S> &model, bool with_moments = true) {
  return nn::CaptureCheckpoint(model.store(), model.config().ToMeta(), with_moments);
}

/// Rebuilds a vocoder from a checkpoint. When `expected_mode` is given the
/// checkpoint must match it.
template <typename S>
WaveNet<S> VocoderFromCheckpoint(const nn::Checkpoint &ck, const VocoderMode *expected_mode = nullptr,
                                 bool restore_optimizer = true) {
  const auto cfg = WaveNetConfig::FromMeta(ck.meta);
  if (expected_mode && cfg.mode != *expected_mode)
    Fail(ErrorCode::kIncompatibleCheckpoint, "checkpoint is an " + ModeName(cfg.mode) + " vocoder (condition width " +
                                                 std::to_string(cfg.condition_input_dim()) + "), expected " +
                                                 ModeName(*expected_mode));
  WaveNet<S> model(cfg);
  nn::RestoreCheckpoint(ck, model.store(), restore_optimizer);
  return model;
}

}  // namespace osa
