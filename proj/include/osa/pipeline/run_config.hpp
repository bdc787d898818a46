// osa/pipeline/run_config.hpp

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

// Every tunable of the pipeline in one flat key = value configuration.
// Defaults reproduce the published system; the "toy" preset shrinks the
// models so that the end-to-end pipeline runs in minutes on one core.

#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "osa/config_map.hpp"
#include "osa/error.hpp"
#include "osa/fileio.hpp"
#include "osa/generation.hpp"
#include "osa/speaker_encoder.hpp"
#include "osa/vocoder_training.hpp"
#include "osa/wavenet.hpp"

namespace osa::pipeline {

struct RunConfig {
  WaveNetConfig wavenet;
  EncoderConfig encoder;
  EncoderTrainConfig encoder_train;
  VocoderTrainConfig vocoder_train;
  int64_t checkpoint_every = 10000;  // 0 disables periodic checkpoints
  int64_t fine_tune_steps = 1000;
  double fine_tune_learning_rate = 1e-4;
  Sampling sampling = Sampling::kSample;
  uint64_t generation_seed = 1;
  uint64_t model_seed = 1;
  bool mcd_include_c0 = false;

  RunConfig() { wavenet.embedding_dim = encoder.proj_size; }

  /// Small models for the synthetic corpus.
  static RunConfig Toy() {
    RunConfig c;
    c.wavenet.blocks = 2;
    c.wavenet.layers_per_block = 8;
    c.wavenet.residual_channels = 32;
    c.wavenet.gate_channels = 32;
    c.wavenet.skip_channels = 64;
    c.wavenet.condition_channels = 32;
    c.encoder.num_layers = 2;
    c.encoder.cell_size = 64;
    c.encoder.proj_size = 32;
    c.wavenet.embedding_dim = c.encoder.proj_size;
    c.encoder_train.steps = 300;
    c.vocoder_train.steps = 300;
    c.vocoder_train.chunk_samples = 2000;
    c.vocoder_train.learning_rate = 1e-3;
    c.vocoder_train.halve_every = 100000;
    c.fine_tune_steps = 50;
    c.fine_tune_learning_rate = 1e-3;
    return c;
  }

  static RunConfig Preset(const std::string &name) {
    if (name == "full") return RunConfig{};
    if (name == "toy") return Toy();
    Fail(ErrorCode::kInvalidArgument, "unknown preset '" + name + "' (expected full or toy)");
  }

  struct Binding {
    std::string key;
    std::function<std::string(const RunConfig &)> get;
    std::function<void(RunConfig &, const std::string &)> set;
  };

  static const std::vector<Binding> &Bindings() {
    static const std::vector<Binding> kBindings = [] {
      std::vector<Binding> b;
      const auto add_int = [&](const std::string &key, auto member) {
        b.push_back({key, [member](const RunConfig &c) { return std::to_string(member(const_cast<RunConfig &>(c))); },
                     [member, key](RunConfig &c, const std::string &v) {
                       auto &ref = member(c);
                       using T = std::remove_reference_t<decltype(ref)>;
                       T parsed{};
                       const auto r = std::from_chars(v.data(), v.data() + v.size(), parsed);
                       if (r.ec != std::errc() || r.ptr != v.data() + v.size())
                         Fail(ErrorCode::kInvalidArgument, "config " + key + ": expected an integer, got '" + v + "'");
                       ref = parsed;
                     }});
      };
      const auto add_real = [&](const std::string &key, auto member) {
        b.push_back({key,
                     [member](const RunConfig &c) {
                       std::ostringstream os;
                       os.precision(17);
                       os << member(const_cast<RunConfig &>(c));
                       return os.str();
                     },
                     [member, key](RunConfig &c, const std::string &v) {
                       size_t used = 0;
                       double parsed = 0.0;
                       try {
                         parsed = std::stod(v, &used);
                       } catch (const std::exception &) {
                         used = 0;
                       }
                       if (used != v.size() || v.empty())
                         Fail(ErrorCode::kInvalidArgument, "config " + key + ": expected a number, got '" + v + "'");
                       member(c) = parsed;
                     }});
      };
#define OSA_INT(key, expr) add_int(key, [](RunConfig &c) -> auto & { return c.expr; })
#define OSA_REAL(key, expr) add_real(key, [](RunConfig &c) -> auto & { return c.expr; })
      OSA_INT("wavenet.blocks", wavenet.blocks);
      OSA_INT("wavenet.layers_per_block", wavenet.layers_per_block);
      OSA_INT("wavenet.filter_width", wavenet.filter_width);
      OSA_INT("wavenet.residual_channels", wavenet.residual_channels);
      OSA_INT("wavenet.gate_channels", wavenet.gate_channels);
      OSA_INT("wavenet.skip_channels", wavenet.skip_channels);
      OSA_INT("wavenet.quantization_classes", wavenet.quantization_classes);
      OSA_INT("wavenet.condition_channels", wavenet.condition_channels);
      OSA_INT("wavenet.condition_filter", wavenet.condition_filter);
      OSA_INT("wavenet.condition_layers", wavenet.condition_layers);
      OSA_INT("encoder.num_layers", encoder.num_layers);
      OSA_INT("encoder.cell_size", encoder.cell_size);
      OSA_INT("encoder.proj_size", encoder.proj_size);
      OSA_INT("encoder.window_frames", encoder.window_frames);
      OSA_INT("encoder.hop_frames", encoder.hop_frames);
      OSA_INT("encoder.min_frames", encoder.min_frames);
      OSA_REAL("encoder.init_scale", encoder.init_scale);
      OSA_REAL("encoder.init_bias", encoder.init_bias);
      OSA_INT("encoder_train.steps", encoder_train.steps);
      OSA_INT("encoder_train.speakers_per_batch", encoder_train.speakers_per_batch);
      OSA_INT("encoder_train.utterances_per_speaker", encoder_train.utterances_per_speaker);
      OSA_INT("encoder_train.crop_frames", encoder_train.crop_frames);
      OSA_REAL("encoder_train.learning_rate", encoder_train.learning_rate);
      OSA_REAL("encoder_train.grad_clip", encoder_train.grad_clip);
      OSA_INT("encoder_train.seed", encoder_train.seed);
      OSA_INT("vocoder_train.steps", vocoder_train.steps);
      OSA_INT("vocoder_train.chunk_samples", vocoder_train.chunk_samples);
      OSA_INT("vocoder_train.batch_size", vocoder_train.batch_size);
      OSA_REAL("vocoder_train.learning_rate", vocoder_train.learning_rate);
      OSA_INT("vocoder_train.halve_every", vocoder_train.halve_every);
      OSA_REAL("vocoder_train.grad_clip", vocoder_train.grad_clip);
      OSA_INT("vocoder_train.seed", vocoder_train.seed);
      OSA_INT("vocoder_train.checkpoint_every", checkpoint_every);
      OSA_INT("fine_tune.steps", fine_tune_steps);
      OSA_REAL("fine_tune.learning_rate", fine_tune_learning_rate);
      OSA_INT("generation.seed", generation_seed);
      OSA_INT("model.seed", model_seed);
#undef OSA_INT
#undef OSA_REAL
      b.push_back({"generation.sampling",
                   [](const RunConfig &c) { return std::string(c.sampling == Sampling::kArgmax ? "argmax" : "sample"); },
                   [](RunConfig &c, const std::string &v) {
                     if (v == "argmax")
                       c.sampling = Sampling::kArgmax;
                     else if (v == "sample")
                       c.sampling = Sampling::kSample;
                     else
                       Fail(ErrorCode::kInvalidArgument, "generation.sampling must be sample or argmax");
                   }});
      b.push_back({"eval.mcd_include_c0", [](const RunConfig &c) { return std::string(c.mcd_include_c0 ? "1" : "0"); },
                   [](RunConfig &c, const std::string &v) {
                     Require(v == "0" || v == "1", ErrorCode::kInvalidArgument, "eval.mcd_include_c0 must be 0 or 1");
                     c.mcd_include_c0 = v == "1";
                   }});
      return b;
    }();
    return kBindings;
  }

  /// Applies key = value overrides; unknown keys are an error.
  void Apply(const StringMap &kv) {
    for (const auto &[k, v] : kv) {
      bool found = false;
      for (const auto &b : Bindings()) {
        if (b.key != k) continue;
        b.set(*this, v);
        found = true;
        break;
      }
      if (!found) Fail(ErrorCode::kInvalidArgument, "unknown config key '" + k + "'");
    }
    wavenet.embedding_dim = encoder.proj_size;
    Validate();
  }

  StringMap ToMap() const {
    StringMap out;
    for (const auto &b : Bindings()) out[b.key] = b.get(*this);
    return out;
  }

  std::string ToText() const { return FormatKeyValueText(ToMap()); }

  /// Stable hash of every setting, used in provenance records.
  uint64_t Hash() const { return Fnv1a64(ToText()); }

  void Validate() const {
    Require(wavenet.embedding_dim == encoder.proj_size, ErrorCode::kInvalidArgument,
            "vocoder embedding width must equal the encoder projection size");
    Require(wavenet.filter_width == 2, ErrorCode::kInvalidArgument, "wavenet.filter_width must be 2");
    Require(wavenet.blocks >= 1 && wavenet.layers_per_block >= 1 && wavenet.residual_channels >= 1 &&
                wavenet.gate_channels >= 1 && wavenet.skip_channels >= 1 && wavenet.condition_channels >= 1,
            ErrorCode::kInvalidArgument, "wavenet sizes must be positive");
    Require(wavenet.quantization_classes == kMulawClasses, ErrorCode::kInvalidArgument,
            "wavenet.quantization_classes must be 256");
    Require(encoder.num_layers >= 1 && encoder.cell_size >= 1 && encoder.proj_size >= 1 &&
                encoder.window_frames >= 1 && encoder.hop_frames >= 1 && encoder.min_frames >= 1,
            ErrorCode::kInvalidArgument, "encoder sizes must be positive");
    Require(vocoder_train.chunk_samples >= 1 && vocoder_train.batch_size >= 1 && vocoder_train.halve_every >= 1,
            ErrorCode::kInvalidArgument, "vocoder_train sizes must be positive");
    Require(encoder_train.steps >= 0 && vocoder_train.steps >= 0 && fine_tune_steps >= 0 && checkpoint_every >= 0,
            ErrorCode::kInvalidArgument, "step counts must be >= 0");
  }

  static RunConfig Load(const std::string &preset, const std::string &config_path, const StringMap &overrides) {
    RunConfig c = Preset(preset);
    if (!config_path.empty()) c.Apply(ParseKeyValueText(ReadTextFile(config_path), config_path));
    c.Apply(overrides);
    return c;
  }

  WaveNetConfig Vocoder(VocoderMode mode) const {
    WaveNetConfig w = wavenet;
    w.mode = mode;
    return w;
  }
};

}  // namespace osa::pipeline
