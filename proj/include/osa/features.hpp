// osa/features.hpp

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

// Frame-level acoustic analysis: 40 mel-cepstra, log-energy, log-F0 and a
// voicing flag per 5 ms frame. The same extractor feeds the speaker encoder,
// the vocoder condition and the objective metrics.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "osa/audio_io.hpp"
#include "osa/error.hpp"
#include "osa/fileio.hpp"
#include "osa/linalg.hpp"

namespace osa {

inline constexpr int kNumCepstra = 40;
inline constexpr int kEnergyColumn = 40;
inline constexpr int kLogF0Column = 41;
inline constexpr int kVuvColumn = 42;
inline constexpr int kFeatureDim = 43;
inline constexpr int kFrameShift = 80;
inline constexpr int kFrameWindow = 400;

struct FeatureConfig {
  int window = kFrameWindow;
  int shift = kFrameShift;
  int fft_size = 512;
  int num_mel_bands = 80;
  int order = kNumCepstra;
  double mel_low_hz = 0.0;
  double mel_high_hz = 8000.0;
  double log_floor = 1e-10;
  double f0_min_hz = 50.0;
  double f0_max_hz = 500.0;
  double voicing_threshold = 0.3;
};

struct AcousticFeatureSequence {
  RowMatrix<float> frames;  // [num_frames x 43]
  int frame_shift_samples = kFrameShift;
  int window_size_samples = kFrameWindow;
  int sample_rate_hz = kCanonicalSampleRate;

  Index num_frames() const { return frames.rows(); }
};

struct F0Track {
  std::vector<double> f0_hz;  // 0 where unvoiced
  std::vector<int> vuv;
  size_t size() const { return vuv.size(); }
};

inline Index NumFrames(size_t num_samples, int window, int shift) {
  if (num_samples < static_cast<size_t>(window)) return 0;
  return static_cast<Index>((num_samples - window) / shift) + 1;
}

/// Periodic Hann window.
inline std::vector<double> HannWindow(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

/// Splits a waveform into Hann-windowed frames; frame k covers samples
/// [k*shift, k*shift + window).
inline RowMatrix<double> FrameSignal(std::span<const float> samples, int window, int shift) {
  Require(shift > 0 && window >= shift, ErrorCode::kInvalidArgument,
          "need window >= shift > 0");
  Require(samples.size() >= static_cast<size_t>(window), ErrorCode::kTooShort,
          "signal of " + std::to_string(samples.size()) + " samples is shorter than one window");
  const Index n = NumFrames(samples.size(), window, shift);
  const auto hann = HannWindow(window);
  RowMatrix<double> frames(n, window);
  for (Index k = 0; k < n; ++k)
    for (int i = 0; i < window; ++i) frames(k, i) = samples[k * shift + i] * hann[i];
  return frames;
}

inline RowMatrix<double> FrameSignal(const Waveform &w, int window, int shift) {
  return FrameSignal(std::span<const float>(w.samples), window, shift);
}

inline double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Power spectrum of one (already windowed) frame, bins 0..fft_size/2.
inline std::vector<double> PowerSpectrum(std::span<const double> frame, int fft_size) {
  Require(static_cast<int>(frame.size()) <= fft_size, ErrorCode::kInvalidArgument,
          "frame longer than FFT size");
  std::vector<double> padded(fft_size, 0.0);
  std::copy(frame.begin(), frame.end(), padded.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  std::vector<double> power(fft_size / 2 + 1);
  for (int k = 0; k <= fft_size / 2; ++k) power[k] = std::norm(spec[k]);
  return power;
}

/// Triangular mel filterbank followed by log and an orthonormal DCT-II.
class MelCepstrum {
 public:
  MelCepstrum(int sample_rate_hz, const FeatureConfig &cfg = {})
      : cfg_(cfg), sample_rate_(sample_rate_hz) {
    Require(cfg.num_mel_bands >= cfg.order, ErrorCode::kInvalidArgument,
            "num_mel_bands must be >= cepstral order");
    const int bins = cfg.fft_size / 2 + 1;
    const double high = std::min(cfg.mel_high_hz, sample_rate_hz / 2.0);
    const double mel_lo = HzToMel(cfg.mel_low_hz), mel_hi = HzToMel(high);
    const int nb = cfg.num_mel_bands;
    centers_hz_.resize(nb + 2);
    for (int b = 0; b < nb + 2; ++b)
      centers_hz_[b] = MelToHz(mel_lo + (mel_hi - mel_lo) * b / (nb + 1));
    weights_ = RowMatrix<double>::Zero(nb, bins);
    for (int b = 0; b < nb; ++b) {
      const double lo = centers_hz_[b], mid = centers_hz_[b + 1], hi = centers_hz_[b + 2];
      for (int k = 0; k < bins; ++k) {
        const double f = static_cast<double>(k) * sample_rate_hz / cfg.fft_size;
        if (f > lo && f < hi) weights_(b, k) = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      }
    }
    dct_.resize(cfg.order, nb);
    for (int n = 0; n < cfg.order; ++n) {
      const double scale = std::sqrt(2.0 / nb) * (n == 0 ? 1.0 / std::sqrt(2.0) : 1.0);
      for (int k = 0; k < nb; ++k)
        dct_(n, k) = scale * std::cos(std::numbers::pi * n * (k + 0.5) / nb);
    }
  }

  /// Center frequency of band b (0-based).
  double BandCenterHz(int b) const { return centers_hz_[b + 1]; }
  int num_bands() const { return cfg_.num_mel_bands; }

  ColVector<double> FilterbankEnergies(std::span<const double> frame) const {
    const auto power = PowerSpectrum(frame, cfg_.fft_size);
    Eigen::Map<const ColVector<double>> p(power.data(), static_cast<Index>(power.size()));
    return weights_ * p;
  }

  ColVector<double> LogFilterbank(std::span<const double> frame) const {
    return FilterbankEnergies(frame).unaryExpr([this](double e) { return std::log(cfg_.log_floor + e); });
  }

  ColVector<double> Cepstra(std::span<const double> frame) const { return dct_ * LogFilterbank(frame); }

  /// DCT-II of an arbitrary log-filterbank vector.
  ColVector<double> Dct(const ColVector<double> &log_bands) const { return dct_ * log_bands; }

 private:
  FeatureConfig cfg_;
  int sample_rate_;
  std::vector<double> centers_hz_;
  RowMatrix<double> weights_;
  RowMatrix<double> dct_;
};

inline ColVector<double> MelCepstra(std::span<const double> frame, int order, int num_mel_bands,
                                    int sample_rate_hz = kCanonicalSampleRate) {
  FeatureConfig cfg;
  cfg.order = order;
  cfg.num_mel_bands = num_mel_bands;
  return MelCepstrum(sample_rate_hz, cfg).Cepstra(frame);
}

inline double FrameEnergy(std::span<const double> frame, double log_floor = 1e-10) {
  double sum = 0.0;
  for (double x : frame) sum += x * x;
  const double mean = frame.empty() ? 0.0 : sum / static_cast<double>(frame.size());
  return std::log(log_floor + mean);
}

/// Normalized cross-correlation pitch tracker. For frame k the analysis
/// segment starts at k*shift and spans `window` samples; lags cover the
/// 50-500 Hz range. The smallest-lag local maximum within 90% of the best
/// peak is chosen to avoid octave-down errors on strongly periodic input.
inline F0Track EstimateF0(const Waveform &w, int shift = kFrameShift, const FeatureConfig &cfg = {}) {
  const int sr = w.sample_rate_hz;
  const int window = cfg.window;
  const Index n_frames = NumFrames(w.size(), window, shift);
  const int lag_min = static_cast<int>(std::ceil(sr / cfg.f0_max_hz));
  const int lag_max = static_cast<int>(std::floor(sr / cfg.f0_min_hz));
  const auto &x = w.samples;
  const auto at = [&](Index i) -> double { return i < static_cast<Index>(x.size()) ? x[i] : 0.0; };

  F0Track track;
  track.f0_hz.assign(n_frames, 0.0);
  track.vuv.assign(n_frames, 0);
  std::vector<double> r(lag_max + 2, 0.0);
  for (Index k = 0; k < n_frames; ++k) {
    const Index s = k * shift;
    double e0 = 0.0;
    for (int n = 0; n < window; ++n) e0 += at(s + n) * at(s + n);
    if (e0 <= 1e-20) continue;
    for (int lag = lag_min - 1; lag <= lag_max + 1; ++lag) {
      double cross = 0.0, e1 = 0.0;
      for (int n = 0; n < window; ++n) {
        const double b = at(s + n + lag);
        cross += at(s + n) * b;
        e1 += b * b;
      }
      r[lag] = e1 > 1e-20 ? cross / std::sqrt(e0 * e1) : 0.0;
    }
    double best = -1.0;
    for (int lag = lag_min; lag <= lag_max; ++lag) best = std::max(best, r[lag]);
    if (best < cfg.voicing_threshold) continue;
    int chosen = -1;
    for (int lag = lag_min; lag <= lag_max; ++lag) {
      if (r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1] && r[lag] >= 0.9 * best) {
        chosen = lag;
        break;
      }
    }
    if (chosen < 0 || r[chosen] < cfg.voicing_threshold) continue;
    double lag = chosen;
    const double denom = r[chosen - 1] - 2.0 * r[chosen] + r[chosen + 1];
    if (denom < 0.0) lag += 0.5 * (r[chosen - 1] - r[chosen + 1]) / denom;
    const double f0 = std::clamp(sr / lag, cfg.f0_min_hz, cfg.f0_max_hz);
    track.f0_hz[k] = f0;
    track.vuv[k] = 1;
  }
  return track;
}

/// Full 43-dim analysis of a waveform.
inline AcousticFeatureSequence ExtractFeatures(const Waveform &w, const FeatureConfig &cfg = {}) {
  Require(w.size() >= static_cast<size_t>(cfg.window), ErrorCode::kTooShort,
          "need at least " + std::to_string(cfg.window) + " samples, got " + std::to_string(w.size()));
  Require(cfg.order == kNumCepstra, ErrorCode::kInvalidArgument, "feature layout requires 40 cepstra");
  const auto frames = FrameSignal(w, cfg.window, cfg.shift);
  const MelCepstrum mcep(w.sample_rate_hz, cfg);
  const auto f0 = EstimateF0(w, cfg.shift, cfg);

  AcousticFeatureSequence out;
  out.frame_shift_samples = cfg.shift;
  out.window_size_samples = cfg.window;
  out.sample_rate_hz = w.sample_rate_hz;
  out.frames.resize(frames.rows(), kFeatureDim);
  for (Index k = 0; k < frames.rows(); ++k) {
    std::span<const double> frame(frames.row(k).data(), static_cast<size_t>(cfg.window));
    const auto c = mcep.Cepstra(frame);
    for (int i = 0; i < kNumCepstra; ++i) out.frames(k, i) = static_cast<float>(c(i));
    out.frames(k, kEnergyColumn) = static_cast<float>(FrameEnergy(frame, cfg.log_floor));
    out.frames(k, kLogF0Column) = f0.vuv[k] ? static_cast<float>(std::log(f0.f0_hz[k])) : 0.0f;
    out.frames(k, kVuvColumn) = static_cast<float>(f0.vuv[k]);
  }
  return out;
}

/// Recovers the (f0, vuv) track stored in a feature sequence.
inline F0Track F0FromFeatures(const AcousticFeatureSequence &f) {
  F0Track t;
  for (Index k = 0; k < f.num_frames(); ++k) {
    const int v = f.frames(k, kVuvColumn) > 0.5f ? 1 : 0;
    t.vuv.push_back(v);
    t.f0_hz.push_back(v ? std::exp(static_cast<double>(f.frames(k, kLogF0Column))) : 0.0);
  }
  return t;
}

// Feature file layout (little-endian):
//   char[4] "OSAF", u32 version=1, u32 num_frames, u32 dim=43,
//   u32 frame_shift, u32 window, u32 sample_rate, then num_frames*dim float32
//   values, row-major.

inline constexpr uint32_t kFeatureFileVersion = 1;

inline std::vector<char> EncodeFeatures(const AcousticFeatureSequence &f) {
  ByteWriter out;
  out.PutBytes("OSAF");
  out.Put<uint32_t>(kFeatureFileVersion);
  out.Put<uint32_t>(static_cast<uint32_t>(f.frames.rows()));
  out.Put<uint32_t>(static_cast<uint32_t>(f.frames.cols()));
  out.Put<uint32_t>(static_cast<uint32_t>(f.frame_shift_samples));
  out.Put<uint32_t>(static_cast<uint32_t>(f.window_size_samples));
  out.Put<uint32_t>(static_cast<uint32_t>(f.sample_rate_hz));
  for (Index i = 0; i < f.frames.size(); ++i) out.Put<float>(f.frames.data()[i]);
  return out.bytes();
}

inline AcousticFeatureSequence DecodeFeatures(const std::vector<char> &bytes, const std::string &name = "features") {
  ByteReader r(bytes.data(), bytes.size(), name);
  if (r.GetBytes(4) != "OSAF") Fail(ErrorCode::kMalformedHeader, name + ": bad magic");
  if (r.Get<uint32_t>() != kFeatureFileVersion) Fail(ErrorCode::kMalformedHeader, name + ": unsupported version");
  AcousticFeatureSequence f;
  const uint32_t rows = r.Get<uint32_t>(), cols = r.Get<uint32_t>();
  if (cols != kFeatureDim) Fail(ErrorCode::kMalformedHeader, name + ": feature dim " + std::to_string(cols));
  f.frame_shift_samples = static_cast<int>(r.Get<uint32_t>());
  f.window_size_samples = static_cast<int>(r.Get<uint32_t>());
  f.sample_rate_hz = static_cast<int>(r.Get<uint32_t>());
  f.frames.resize(rows, cols);
  for (Index i = 0; i < f.frames.size(); ++i) f.frames.data()[i] = r.Get<float>();
  return f;
}

inline void WriteFeatures(const std::filesystem::path &path, const AcousticFeatureSequence &f) {
  WriteFileAtomic(path, EncodeFeatures(f));
}

inline AcousticFeatureSequence ReadFeatures(const std::filesystem::path &path) {
  return DecodeFeatures(ReadFileBytes(path), path.string());
}

/// Per-dimension z-normalization statistics.
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  static constexpr double kMinStd = 1e-3;

  /// Accumulates over every frame of every sequence.
  static FeatureStats Compute(const std::vector<const AcousticFeatureSequence *> &seqs) {
    Require(!seqs.empty(), ErrorCode::kInsufficientData, "no sequences for normalization stats");
    std::vector<double> sum(kFeatureDim, 0.0), sq(kFeatureDim, 0.0);
    double count = 0.0;
    for (const auto *s : seqs) {
      for (Index k = 0; k < s->num_frames(); ++k) {
        for (int d = 0; d < kFeatureDim; ++d) {
          const double v = s->frames(k, d);
          sum[d] += v;
          sq[d] += v * v;
        }
        count += 1.0;
      }
    }
    Require(count > 0, ErrorCode::kInsufficientData, "no frames for normalization stats");
    FeatureStats st;
    for (int d = 0; d < kFeatureDim; ++d) {
      const double m = sum[d] / count;
      const double var = std::max(0.0, sq[d] / count - m * m);
      st.mean.push_back(m);
      st.stddev.push_back(std::max(std::sqrt(var), kMinStd));
    }
    return st;
  }

  RowMatrix<float> Apply(const RowMatrix<float> &frames) const {
    Require(frames.cols() == static_cast<Index>(mean.size()), ErrorCode::kShapeMismatch,
            "normalization stats dimension mismatch");
    RowMatrix<float> out(frames.rows(), frames.cols());
    for (Index k = 0; k < frames.rows(); ++k)
      for (Index d = 0; d < frames.cols(); ++d)
        out(k, d) = static_cast<float>((frames(k, d) - mean[d]) / stddev[d]);
    return out;
  }

  static FeatureStats Identity() {
    FeatureStats st;
    st.mean.assign(kFeatureDim, 0.0);
    st.stddev.assign(kFeatureDim, 1.0);
    return st;
  }

  std::string ToText() const {
    std::ostringstream os;
    os.precision(17);
    os << "dim " << mean.size() << "\nmean";
    for (double m : mean) os << ' ' << m;
    os << "\nstd";
    for (double s : stddev) os << ' ' << s;
    os << '\n';
    return os.str();
  }

  static FeatureStats FromText(const std::string &text) {
    std::istringstream is(text);
    std::string tag;
    size_t dim = 0;
    FeatureStats st;
    if (!(is >> tag >> dim) || tag != "dim") Fail(ErrorCode::kMalformedHeader, "stats file: missing dim");
    st.mean.resize(dim);
    st.stddev.resize(dim);
    if (!(is >> tag) || tag != "mean") Fail(ErrorCode::kMalformedHeader, "stats file: missing mean");
    for (auto &m : st.mean)
      if (!(is >> m)) Fail(ErrorCode::kMalformedHeader, "stats file: short mean row");
    if (!(is >> tag) || tag != "std") Fail(ErrorCode::kMalformedHeader, "stats file: missing std");
    for (auto &s : st.stddev)
      if (!(is >> s)) Fail(ErrorCode::kMalformedHeader, "stats file: short std row");
    return st;
  }
};

}  // namespace osa
