// osa/audio_io.hpp

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
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "osa/error.hpp"
#include "osa/fileio.hpp"

namespace osa {

inline constexpr int kCanonicalSampleRate = 16000;
inline constexpr int kMulawClasses = 256;
inline constexpr int kMulawMidpoint = 128;

/// Mono waveform with samples in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate_hz = kCanonicalSampleRate;

  size_t size() const { return samples.size(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

/// Waveform quantized to 8-bit mu-law class indices.
struct QuantizedWaveform {
  std::vector<int> indices;
  int sample_rate_hz = kCanonicalSampleRate;
};

inline float ClipSample(float x) {
  if (std::isnan(x)) return 0.0f;
  return std::clamp(x, -1.0f, 1.0f);
}

/// Parses a RIFF/WAVE byte image. Only 16-bit signed mono PCM is accepted;
/// samples are scaled by 1/32768.
inline Waveform ParseWav(const char *data, size_t size, const std::string &name = "wav") {
  ByteReader r(data, size, name);
  if (size < 12 || r.GetBytes(4) != "RIFF") Fail(ErrorCode::kMalformedHeader, name + ": missing RIFF tag");
  r.Get<uint32_t>();
  if (r.GetBytes(4) != "WAVE") Fail(ErrorCode::kMalformedHeader, name + ": missing WAVE tag");

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  while (r.remaining() >= 8) {
    std::string id = r.GetBytes(4);
    uint32_t chunk_size = r.Get<uint32_t>();
    if (id == "fmt ") {
      if (chunk_size < 16) Fail(ErrorCode::kMalformedHeader, name + ": fmt chunk too small");
      format = r.Get<uint16_t>();
      channels = r.Get<uint16_t>();
      rate = r.Get<uint32_t>();
      r.Get<uint32_t>();  // byte rate
      r.Get<uint16_t>();  // block align
      bits = r.Get<uint16_t>();
      r.Skip(chunk_size - 16 + (chunk_size & 1));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) Fail(ErrorCode::kMalformedHeader, name + ": data chunk before fmt chunk");
      if (format != 1) Fail(ErrorCode::kUnsupportedEncoding, name + ": non-PCM format " + std::to_string(format));
      if (channels != 1) Fail(ErrorCode::kUnsupportedEncoding, name + ": " + std::to_string(channels) + " channels");
      if (bits != 16) Fail(ErrorCode::kUnsupportedEncoding, name + ": " + std::to_string(bits) + "-bit samples");
      if (rate == 0) Fail(ErrorCode::kMalformedHeader, name + ": zero sample rate");
      if (chunk_size > r.remaining()) Fail(ErrorCode::kMalformedHeader, name + ": data chunk overruns file");
      Waveform w;
      w.sample_rate_hz = static_cast<int>(rate);
      w.samples.resize(chunk_size / 2);
      for (auto &s : w.samples) s = static_cast<float>(r.Get<int16_t>()) / 32768.0f;
      return w;
    } else {
      r.Skip(std::min<size_t>(chunk_size + (chunk_size & 1), r.remaining()));
    }
  }
  Fail(ErrorCode::kMalformedHeader, name + (have_fmt ? ": no data chunk" : ": no fmt chunk"));
}

inline Waveform ReadWav(const std::filesystem::path &path) {
  auto bytes = ReadFileBytes(path);
  return ParseWav(bytes.data(), bytes.size(), path.string());
}

inline int16_t ToPcm16(float x) {
  double v = std::round(static_cast<double>(ClipSample(x)) * 32768.0);
  return static_cast<int16_t>(std::clamp(v, -32768.0, 32767.0));
}

inline std::vector<char> EncodeWav(const Waveform &w) {
  Require(w.sample_rate_hz > 0, ErrorCode::kInvalidArgument, "sample rate must be positive");
  const uint32_t data_bytes = static_cast<uint32_t>(w.samples.size() * 2);
  ByteWriter out;
  out.PutBytes("RIFF");
  out.Put<uint32_t>(36 + data_bytes);
  out.PutBytes("WAVE");
  out.PutBytes("fmt ");
  out.Put<uint32_t>(16);
  out.Put<uint16_t>(1);
  out.Put<uint16_t>(1);
  out.Put<uint32_t>(static_cast<uint32_t>(w.sample_rate_hz));
  out.Put<uint32_t>(static_cast<uint32_t>(w.sample_rate_hz) * 2);
  out.Put<uint16_t>(2);
  out.Put<uint16_t>(16);
  out.PutBytes("data");
  out.Put<uint32_t>(data_bytes);
  for (float s : w.samples) out.Put<int16_t>(ToPcm16(s));
  return out.bytes();
}

inline void WriteWav(const std::filesystem::path &path, const Waveform &w) {
  WriteFileAtomic(path, EncodeWav(w));
}

// mu-law companding with mu = 255.

inline double MulawCompress(double x) {
  constexpr double kMu = 255.0;
  const double mag = std::log1p(kMu * std::fabs(x)) / std::log1p(kMu);
  return x < 0 ? -mag : mag;
}

inline double MulawExpand(double y) {
  constexpr double kMu = 255.0;
  const double mag = (std::pow(1.0 + kMu, std::fabs(y)) - 1.0) / kMu;
  return y < 0 ? -mag : mag;
}

inline int MulawEncodeSample(float x) {
  const double f = MulawCompress(ClipSample(x));
  const int idx = static_cast<int>(std::floor((f + 1.0) / 2.0 * kMulawClasses));
  return std::clamp(idx, 0, kMulawClasses - 1);
}

/// Bin-center reconstruction of a class index.
inline float MulawDecodeIndex(int index) {
  Require(index >= 0 && index < kMulawClasses, ErrorCode::kOutOfRange,
          "mu-law index " + std::to_string(index));
  const double y = (index + 0.5) / (kMulawClasses / 2.0) - 1.0;
  return static_cast<float>(MulawExpand(y));
}

inline QuantizedWaveform MulawEncode(const Waveform &w) {
  QuantizedWaveform q;
  q.sample_rate_hz = w.sample_rate_hz;
  q.indices.reserve(w.samples.size());
  for (float s : w.samples) q.indices.push_back(MulawEncodeSample(s));
  return q;
}

inline Waveform MulawDecode(const QuantizedWaveform &q) {
  Waveform w;
  w.sample_rate_hz = q.sample_rate_hz;
  w.samples.reserve(q.indices.size());
  for (int i : q.indices) w.samples.push_back(MulawDecodeIndex(i));
  return w;
}

}  // namespace osa
