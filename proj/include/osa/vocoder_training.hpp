// osa/vocoder_training.hpp

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

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "osa/audio_io.hpp"
#include "osa/error.hpp"
#include "osa/features.hpp"
#include "osa/nn/parameters.hpp"
#include "osa/wavenet.hpp"

namespace osa {

/// The samples a frame sequence describes for the vocoder: frame k owns the
/// frame_shift samples centred on its analysis window, so the span starts
/// (window - shift) / 2 samples into the recording and holds F * shift
/// samples.
inline Waveform VocoderTargetSpan(const Waveform &w, Index num_frames, int window = kFrameWindow,
                                  int shift = kFrameShift) {
  const size_t offset = static_cast<size_t>((window - shift) / 2);
  const size_t len = static_cast<size_t>(num_frames * shift);
  Require(w.size() >= offset + len, ErrorCode::kAlignment,
          "waveform of " + std::to_string(w.size()) + " samples cannot hold " + std::to_string(num_frames) +
              " frames");
  Waveform out;
  out.sample_rate_hz = w.sample_rate_hz;
  out.samples.assign(w.samples.begin() + offset, w.samples.begin() + offset + len);
  return out;
}

/// One training example: mu-law targets aligned with frame-level condition
/// input (features plus, in OSA mode, the embedding).
struct VocoderExample {
  std::string id;
  std::vector<int> quantized;
  RowMatrix<float> cond_input;
};

struct VocoderTrainConfig {
  int64_t steps = 400000;
  int chunk_samples = 4000;
  int batch_size = 1;
  double learning_rate = 1e-4;
  int64_t halve_every = 100000;
  double grad_clip = 0.0;
  uint64_t seed = 1;
};

struct ChunkSpec {
  size_t example = 0;
  int64_t start = 0;    // first sample scored
  int64_t length = 0;   // samples scored
  int64_t history = 0;  // context samples evaluated before start
};

/// Aligned length check: |samples - frames*shift| must not exceed one frame.
inline void CheckAlignment(const VocoderExample &ex, int frame_shift) {
  const int64_t samples = static_cast<int64_t>(ex.quantized.size());
  const int64_t expected = static_cast<int64_t>(ex.cond_input.rows()) * frame_shift;
  if (std::llabs(samples - expected) > frame_shift)
    Fail(ErrorCode::kAlignment, ex.id + ": " + std::to_string(samples) + " samples vs " +
                                    std::to_string(ex.cond_input.rows()) + " frames x " +
                                    std::to_string(frame_shift));
}

/// Picks a chunk inside one utterance. Deterministic in (seed, step, item).
inline ChunkSpec SampleChunk(const std::vector<VocoderExample> &examples, const VocoderTrainConfig &cfg,
                             int frame_shift, int64_t receptive_field, int64_t step, int item) {
  std::seed_seq seq{static_cast<uint64_t>(cfg.seed), static_cast<uint64_t>(step), static_cast<uint64_t>(item),
                    uint64_t{0x766f63}};
  std::mt19937_64 rng(seq);
  ChunkSpec c;
  c.example = std::uniform_int_distribution<size_t>(0, examples.size() - 1)(rng);
  const auto &ex = examples[c.example];
  const int64_t usable = std::min<int64_t>(static_cast<int64_t>(ex.quantized.size()),
                                           static_cast<int64_t>(ex.cond_input.rows()) * frame_shift);
  c.length = std::min<int64_t>(cfg.chunk_samples, usable);
  c.start = std::uniform_int_distribution<int64_t>(0, usable - c.length)(rng);
  c.history = std::min<int64_t>(receptive_field, c.start);
  return c;
}

/// Teacher-forced cross-entropy of one chunk; records onto `tape`.
template <typename S>
nn::Tensor<S> ChunkLoss(nn::Tape<S> &tape, const WaveNet<S> &model, const VocoderExample &ex, const ChunkSpec &c) {
  const int shift = model.config().frame_shift;
  const int64_t begin = c.start - c.history, end = c.start + c.length;
  const auto frames = model.ConditionFrames(tape, ex.cond_input);
  const Index f0 = begin / shift, f1 = (end + shift - 1) / shift;
  auto cond = nn::RepeatRows(tape, nn::SliceRows(tape, frames, f0, f1 - f0), shift);
  cond = nn::SliceRows(tape, cond, begin - f0 * shift, end - begin);
  std::vector<int> prev(end - begin), target(end - begin);
  for (int64_t p = begin; p < end; ++p) {
    prev[p - begin] = p == 0 ? kMulawMidpoint : ex.quantized[p - 1];
    target[p - begin] = ex.quantized[p];
  }
  const auto logits = model.Logits(tape, prev, cond);
  return nn::SoftmaxCrossEntropy(tape, logits, target, c.history);
}

/// Full-utterance teacher-forced cross-entropy (no gradient).
template <typename S>
double TeacherForcedLoss(const WaveNet<S> &model, const VocoderExample &ex) {
  nn::Tape<S> tape(false);
  const int shift = model.config().frame_shift;
  const int64_t n = std::min<int64_t>(static_cast<int64_t>(ex.quantized.size()), ex.cond_input.rows() * shift);
  auto cond = nn::SliceRows(tape, model.BuildCondition(tape, ex.cond_input), 0, n);
  std::vector<int> x(ex.quantized.begin(), ex.quantized.begin() + n);
  const auto logits = model.TeacherForced(tape, x, cond);
  return static_cast<double>(nn::SoftmaxCrossEntropy(tape, logits, x).item());
}

using VocoderStepCallback = std::function<void(int64_t step, double loss)>;

/// Chunked teacher-forced training with Adam and the halving schedule.
/// Continues from the store's current step count, so a restored checkpoint
/// resumes the same trajectory.
template <typename S>
std::vector<double> TrainVocoder(WaveNet<S> &model, const std::vector<VocoderExample> &examples,
                                 const VocoderTrainConfig &cfg, const VocoderStepCallback &on_step = {}) {
  Require(!examples.empty(), ErrorCode::kInsufficientData, "no vocoder training examples");
  Require(cfg.chunk_samples >= 1 && cfg.batch_size >= 1, ErrorCode::kInvalidArgument, "bad chunk/batch size");
  const auto &mcfg = model.config();
  for (const auto &ex : examples) {
    CheckAlignment(ex, mcfg.frame_shift);
    Require(ex.cond_input.cols() == mcfg.condition_input_dim(), ErrorCode::kShapeMismatch,
            ex.id + ": condition width " + std::to_string(ex.cond_input.cols()) + ", model expects " +
                std::to_string(mcfg.condition_input_dim()));
    Require(!ex.quantized.empty(), ErrorCode::kInsufficientData, ex.id + ": empty waveform");
  }
  const int64_t rf = mcfg.ReceptiveField();
  auto &store = model.store();
  std::vector<double> losses;
  for (int64_t i = 0; i < cfg.steps; ++i) {
    const int64_t step = store.step_count();
    store.ZeroGrad();
    double total = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto chunk = SampleChunk(examples, cfg, mcfg.frame_shift, rf, step, b);
      nn::Tape<S> tape;
      const auto loss = ChunkLoss(tape, model, examples[chunk.example], chunk);
      tape.Backward(loss);
      total += static_cast<double>(loss.item());
    }
    if (cfg.batch_size > 1)
      for (auto &slot : store.slots()) slot.param.grad() /= static_cast<S>(cfg.batch_size);
    nn::ClipGradNorm(store, cfg.grad_clip);
    nn::AdamStep(store, nn::LrSchedule(step, cfg.learning_rate, cfg.halve_every));
    losses.push_back(total / cfg.batch_size);
    if (on_step) on_step(store.step_count(), losses.back());
  }
  return losses;
}

/// Continues training from an existing model with a fresh optimizer state.
template <typename S>
std::vector<double> FineTune(WaveNet<S> &model, const std::vector<VocoderExample> &examples,
                             const VocoderTrainConfig &cfg, const VocoderStepCallback &on_step = {}) {
  auto &store = model.store();
  for (auto &slot : store.slots()) {
    slot.m.setZero();
    slot.v.setZero();
  }
  store.set_step_count(0);
  return TrainVocoder(model, examples, cfg, on_step);
}

}  // namespace osa
