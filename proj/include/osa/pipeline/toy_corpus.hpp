// osa/pipeline/toy_corpus.hpp

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

// Synthetic multi-speaker corpus of vowel-like signals. Each speaker has its
// own F0 range, spectral tilt and formant scaling, so speaker identity is
// recoverable from the acoustic features.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "osa/audio_io.hpp"
#include "osa/error.hpp"

namespace osa::pipeline {

struct ToyCorpusConfig {
  int num_speakers = 8;
  int train_per_speaker = 6;
  int adapt_per_speaker = 2;
  int test_per_speaker = 2;
  double min_seconds = 1.0;
  double max_seconds = 1.5;
  int sample_rate_hz = kCanonicalSampleRate;
  uint64_t seed = 1;
};

struct ToySpeaker {
  double f0_hz = 120.0;
  double tilt_db_per_octave = -6.0;
  double formant_scale = 1.0;
};

/// Speakers spread on a log-F0 grid from 90 to 260 Hz with interleaved
/// tilts and formant scales, plus a small seeded jitter.
inline ToySpeaker MakeToySpeaker(int index, int num_speakers, uint64_t seed) {
  std::seed_seq seq{seed, static_cast<uint64_t>(index), uint64_t{0x73706b}};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);
  const double pos = num_speakers > 1 ? static_cast<double>(index) / (num_speakers - 1) : 0.5;
  ToySpeaker s;
  s.f0_hz = 90.0 * std::pow(260.0 / 90.0, pos) * (1.0 + jitter(rng));
  s.tilt_db_per_octave = (index % 2 == 0 ? -4.0 : -10.0) + 10.0 * jitter(rng);
  s.formant_scale = (index % 4 < 2 ? 0.9 : 1.15) + jitter(rng);
  return s;
}

/// Vowel formant targets (F1, F2, F3) in Hz.
inline constexpr std::array<std::array<double, 3>, 5> kVowelFormants{{
    {730.0, 1090.0, 2440.0},
    {270.0, 2290.0, 3010.0},
    {300.0, 870.0, 2240.0},
    {530.0, 1840.0, 2480.0},
    {570.0, 840.0, 2410.0},
}};

/// One utterance: 2 to 4 vowel targets with linear formant glides, a
/// sinusoidal F0 wobble with declination, harmonic synthesis through a
/// resonance envelope, raised-cosine edges and a low noise floor.
inline Waveform SynthesizeToyUtterance(const ToySpeaker &spk, double seconds, int sample_rate_hz,
                                       std::mt19937_64 &rng) {
  const auto n = static_cast<size_t>(seconds * sample_rate_hz);
  Require(n > 0, ErrorCode::kInvalidArgument, "toy utterance must be non-empty");
  std::uniform_int_distribution<int> vowel(0, static_cast<int>(kVowelFormants.size()) - 1);
  std::uniform_int_distribution<int> count(2, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<int> targets(count(rng));
  for (auto &v : targets) v = vowel(rng);
  const double wobble_hz = 3.0 + 3.0 * unit(rng);
  const double wobble_phase = 2.0 * std::numbers::pi * unit(rng);
  const double f0_scale = 0.92 + 0.16 * unit(rng);

  constexpr int kBlock = 80;
  constexpr double kBandwidth = 90.0;
  const double nyquist_guard = 0.45 * sample_rate_hz;
  std::vector<double> phase;
  std::vector<double> amps;
  Waveform w;
  w.sample_rate_hz = sample_rate_hz;
  w.samples.resize(n);
  double peak = 0.0;
  std::vector<double> raw(n);
  double f0 = spk.f0_hz;
  for (size_t b0 = 0; b0 < n; b0 += kBlock) {
    const double t = static_cast<double>(b0) / sample_rate_hz;
    const double pos = static_cast<double>(b0) / static_cast<double>(n);
    // Formants at this block.
    const double seg = pos * static_cast<double>(targets.size() - 1);
    const auto i0 = std::min(static_cast<size_t>(seg), targets.size() - 1);
    const auto i1 = std::min(i0 + 1, targets.size() - 1);
    const double frac = seg - static_cast<double>(i0);
    std::array<double, 3> formants{};
    for (int k = 0; k < 3; ++k)
      formants[k] = spk.formant_scale *
                    ((1.0 - frac) * kVowelFormants[targets[i0]][k] + frac * kVowelFormants[targets[i1]][k]);
    f0 = spk.f0_hz * f0_scale * (1.0 + 0.04 * std::sin(2.0 * std::numbers::pi * wobble_hz * t + wobble_phase)) *
         (1.0 - 0.08 * pos);
    const auto harmonics = static_cast<size_t>(nyquist_guard / f0);
    phase.resize(std::max(phase.size(), harmonics), 0.0);
    amps.assign(harmonics, 0.0);
    for (size_t h = 0; h < harmonics; ++h) {
      const double fh = f0 * static_cast<double>(h + 1);
      double env = 0.02;
      for (double fm : formants) {
        const double d = (fh - fm) / kBandwidth;
        env += 1.0 / (1.0 + d * d);
      }
      amps[h] = env * std::pow(10.0, spk.tilt_db_per_octave * std::log2(static_cast<double>(h + 1)) / 20.0);
    }
    const size_t b1 = std::min(n, b0 + kBlock);
    for (size_t i = b0; i < b1; ++i) {
      double v = 0.0;
      for (size_t h = 0; h < harmonics; ++h) {
        phase[h] += 2.0 * std::numbers::pi * f0 * static_cast<double>(h + 1) / sample_rate_hz;
        v += amps[h] * std::sin(phase[h]);
      }
      raw[i] = v;
      peak = std::max(peak, std::fabs(v));
    }
  }
  const double edge = 0.02 * sample_rate_hz;
  for (size_t i = 0; i < n; ++i) {
    const double d = std::min(static_cast<double>(i), static_cast<double>(n - 1 - i));
    const double gain = d >= edge ? 1.0 : 0.5 - 0.5 * std::cos(std::numbers::pi * d / edge);
    w.samples[i] = static_cast<float>(0.5 * gain * raw[i] / peak + 1e-3 * noise(rng));
  }
  return w;
}

struct ToyUtterance {
  std::string utterance_id;
  std::string speaker_id;
  std::string split;
  Waveform waveform;
};

/// Generates the whole corpus. Utterance i of speaker s is seeded by
/// (seed, s, i), so the output is independent of generation order.
inline std::vector<ToyUtterance> MakeToyCorpus(const ToyCorpusConfig &cfg) {
  Require(cfg.num_speakers >= 2, ErrorCode::kInvalidArgument, "toy corpus needs >= 2 speakers");
  Require(cfg.min_seconds > 0.0 && cfg.max_seconds >= cfg.min_seconds, ErrorCode::kInvalidArgument,
          "toy corpus duration range is invalid");
  std::vector<ToyUtterance> out;
  const std::array<std::pair<const char *, int>, 3> splits{
      {{"train", cfg.train_per_speaker}, {"adapt", cfg.adapt_per_speaker}, {"test", cfg.test_per_speaker}}};
  for (int s = 0; s < cfg.num_speakers; ++s) {
    const auto spk = MakeToySpeaker(s, cfg.num_speakers, cfg.seed);
    char spk_id[16];
    std::snprintf(spk_id, sizeof(spk_id), "spk%02d", s);
    int index = 0;
    for (const auto &[split, count] : splits) {
      for (int u = 0; u < count; ++u, ++index) {
        std::seed_seq seq{cfg.seed, static_cast<uint64_t>(s), static_cast<uint64_t>(index), uint64_t{0x757474}};
        std::mt19937_64 rng(seq);
        const double seconds = std::uniform_real_distribution<double>(cfg.min_seconds, cfg.max_seconds)(rng);
        char utt_id[32];
        std::snprintf(utt_id, sizeof(utt_id), "%s_%03d", spk_id, index);
        out.push_back({utt_id, spk_id, split, SynthesizeToyUtterance(spk, seconds, cfg.sample_rate_hz, rng)});
      }
    }
  }
  return out;
}

}  // namespace osa::pipeline
