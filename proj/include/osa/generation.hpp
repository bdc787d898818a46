// osa/generation.hpp

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

// Incremental autoregressive generation. Each residual layer keeps a ring
// buffer of its last `dilation` inputs, so one step costs one pass through
// the stack instead of a re-evaluation of the whole history.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "osa/audio_io.hpp"
#include "osa/nn/ops.hpp"
#include "osa/wavenet.hpp"

namespace osa {

enum class Sampling { kSample, kArgmax };

template <typename S>
class GenerationCache {
 public:
  /// `cond_frames` is the condition network output, [F x C].
  GenerationCache(const WaveNet<S> &model, const RowMatrix<S> &cond_frames) : model_(model) {
    const auto &cfg = model.config();
    for (const auto &layer : model.layers()) {
      rings_.push_back(RowMatrix<S>::Zero(layer.dilation, cfg.residual_channels));
      // Frame-rate projection of the condition; identical to projecting the
      // repeated sample-rate rows.
      RowMatrix<S> proj = cond_frames * layer.cond_weight.value();
      proj.rowwise() += Eigen::Map<const RowVector<S>>(layer.conv_bias.value().data(), layer.conv_bias.size());
      cond_proj_.push_back(std::move(proj));
    }
    num_frames_ = cond_frames.rows();
    h_.resize(cfg.residual_channels);
    stacked_.resize(2 * cfg.residual_channels);
  }

  int64_t position() const { return t_; }
  int64_t length() const { return num_frames_ * model_.config().frame_shift; }

  /// Advances one sample given the previous class index; returns logits.
  const RowVector<S> &Step(int prev_index) {
    const auto &cfg = model_.config();
    const Index R = cfg.residual_channels, G = cfg.gate_channels;
    const Index frame = t_ / cfg.frame_shift;
    Require(frame < num_frames_, ErrorCode::kOutOfRange, "generation ran past the condition");
    h_ = model_.input_table().value().row(prev_index) +
         Eigen::Map<const RowVector<S>>(model_.input_bias().value().data(), R);
    skip_.setZero(cfg.skip_channels);
    const auto &layers = model_.layers();
    for (size_t l = 0; l < layers.size(); ++l) {
      const auto &L = layers[l];
      auto &ring = rings_[l];
      const Index slot = t_ % L.dilation;
      stacked_.head(R) = h_;
      stacked_.tail(R) = ring.row(slot);
      ring.row(slot) = h_;
      pre_.noalias() = stacked_ * L.conv_kernel.value();
      pre_ += cond_proj_[l].row(frame);
      z_ = pre_.head(G).array().tanh() * pre_.tail(G).unaryExpr([](S v) { return nn::detail::Sigmoid(v); }).array();
      skip_.noalias() += z_ * L.skip_weight.value();
      skip_ += Eigen::Map<const RowVector<S>>(L.skip_bias.value().data(), cfg.skip_channels);
      if (l + 1 < layers.size()) {
        h_.noalias() += z_ * L.res_weight.value();
        h_ += Eigen::Map<const RowVector<S>>(L.res_bias.value().data(), R);
      }
    }
    post_ = skip_.cwiseMax(S(0));
    post2_.noalias() = post_ * model_.post1_weight().value();
    post2_ += Eigen::Map<const RowVector<S>>(model_.post1_bias().value().data(), cfg.skip_channels);
    post2_ = post2_.cwiseMax(S(0));
    logits_.noalias() = post2_ * model_.post2_weight().value();
    logits_ += Eigen::Map<const RowVector<S>>(model_.post2_bias().value().data(), cfg.quantization_classes);
    ++t_;
    return logits_;
  }

 private:
  const WaveNet<S> &model_;
  std::vector<RowMatrix<S>> rings_;
  std::vector<RowMatrix<S>> cond_proj_;
  Index num_frames_ = 0;
  int64_t t_ = 0;
  RowVector<S> h_, stacked_, pre_, z_, skip_, post_, post2_, logits_;
};

/// Draws a class from logits: inverse CDF for kSample, first maximum for
/// kArgmax.
template <typename S>
int DrawClass(const RowVector<S> &logits, Sampling mode, std::mt19937_64 &rng) {
  Index best = 0;
  logits.maxCoeff(&best);
  if (mode == Sampling::kArgmax) return static_cast<int>(best);
  const double mx = static_cast<double>(logits(best));
  std::vector<double> cdf(logits.size());
  double acc = 0.0;
  for (Index i = 0; i < logits.size(); ++i) {
    acc += std::exp(static_cast<double>(logits(i)) - mx);
    cdf[i] = acc;
  }
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * acc;
  for (Index i = 0; i < logits.size(); ++i)
    if (u < cdf[i]) return static_cast<int>(i);
  return static_cast<int>(logits.size() - 1);
}

struct GenerationResult {
  QuantizedWaveform indices;
  Waveform waveform;
};

/// Autoregressive generation over the whole condition. `logits_out`, when
/// given, receives every step's logits (for equivalence tests).
template <typename S>
GenerationResult Generate(const WaveNet<S> &model, const RowMatrix<float> &cond_input, Sampling sampling,
                          uint64_t seed, int64_t max_samples = -1, RowMatrix<S> *logits_out = nullptr) {
  nn::Tape<S> tape(false);
  const RowMatrix<S> cond_frames = model.ConditionFrames(tape, cond_input).value();
  GenerationCache<S> cache(model, cond_frames);
  int64_t n = cache.length();
  if (max_samples >= 0) n = std::min(n, max_samples);
  std::mt19937_64 rng(seed);
  GenerationResult out;
  out.indices.indices.reserve(n);
  if (logits_out) logits_out->resize(n, model.config().quantization_classes);
  int prev = kMulawMidpoint;
  for (int64_t t = 0; t < n; ++t) {
    const auto &logits = cache.Step(prev);
    if (logits_out) logits_out->row(t) = logits;
    prev = DrawClass(logits, sampling, rng);
    out.indices.indices.push_back(prev);
  }
  out.waveform = MulawDecode(out.indices);
  return out;
}

/// Reference generator without caching: at every step the whole stack is
/// re-evaluated on the sequence generated so far. Quadratic cost; meant for
/// verifying the cache.
template <typename S>
RowMatrix<S> GenerateNaiveLogits(const WaveNet<S> &model, const RowMatrix<float> &cond_input, Sampling sampling,
                                 uint64_t seed, int64_t num_samples) {
  nn::Tape<S> tape(false);
  const auto cond = model.BuildCondition(tape, cond_input);
  Require(num_samples <= cond.rows(), ErrorCode::kOutOfRange, "naive generation longer than condition");
  std::mt19937_64 rng(seed);
  RowMatrix<S> all(num_samples, model.config().quantization_classes);
  std::vector<int> prev{kMulawMidpoint};
  for (int64_t t = 0; t < num_samples; ++t) {
    const auto prefix_cond = nn::SliceRows(tape, cond, 0, t + 1);
    const auto logits = model.Logits(tape, prev, prefix_cond);
    const RowVector<S> last = logits.value().row(t);
    all.row(t) = last;
    prev.push_back(DrawClass(last, sampling, rng));
  }
  return all;
}

}  // namespace osa
