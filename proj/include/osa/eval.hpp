// osa/eval.hpp

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

// Objective metrics for copy synthesis, the speaker-verification EER and
// the Pearson correlation test.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "osa/audio_io.hpp"
#include "osa/error.hpp"
#include "osa/features.hpp"
#include "osa/speaker_encoder.hpp"

namespace osa {

inline constexpr double kSnrCapDb = 100.0;
inline constexpr size_t kSampleTrimTolerance = kFrameShift;
inline constexpr Index kFrameTrimTolerance = 1;

/// Common length after trimming, or an error if the lengths differ by more
/// than `tolerance`.
inline size_t TrimmedLength(size_t a, size_t b, size_t tolerance, const char *what) {
  const size_t diff = a > b ? a - b : b - a;
  if (diff > tolerance)
    Fail(ErrorCode::kLengthMismatch, std::string(what) + ": lengths " + std::to_string(a) + " and " +
                                         std::to_string(b) + " differ by more than " + std::to_string(tolerance));
  return std::min(a, b);
}

inline double Snr(const Waveform &ref, const Waveform &gen) {
  const size_t n = TrimmedLength(ref.size(), gen.size(), kSampleTrimTolerance, "snr");
  double signal = 0.0, noise = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double r = ref.samples[i], d = r - gen.samples[i];
    signal += r * r;
    noise += d * d;
  }
  Require(signal > 0.0, ErrorCode::kDegenerate, "snr: all-zero reference");
  if (noise < 1e-12 * signal) return kSnrCapDb;
  return std::min(kSnrCapDb, 10.0 * std::log10(signal / noise));
}

/// Log-amplitude spectrogram in dB: Hann frames (400/80), 512-point FFT.
inline RowMatrix<double> LogAmplitudeSpectrogram(std::span<const float> samples, double floor = 1e-10) {
  const auto frames = FrameSignal(samples, kFrameWindow, kFrameShift);
  constexpr int kFft = 512;
  RowMatrix<double> out(frames.rows(), kFft / 2 + 1);
  Eigen::FFT<double> fft;
  std::vector<double> padded(kFft);
  std::vector<std::complex<double>> spec;
  for (Index k = 0; k < frames.rows(); ++k) {
    std::fill(padded.begin(), padded.end(), 0.0);
    for (Index i = 0; i < frames.cols(); ++i) padded[i] = frames(k, i);
    fft.fwd(spec, padded);
    for (int b = 0; b <= kFft / 2; ++b) out(k, b) = 20.0 * std::log10(std::abs(spec[b]) + floor);
  }
  return out;
}

inline double RmseLas(const Waveform &ref, const Waveform &gen) {
  const size_t n = TrimmedLength(ref.size(), gen.size(), kSampleTrimTolerance, "rmse_las");
  const auto a = LogAmplitudeSpectrogram(std::span<const float>(ref.samples.data(), n));
  const auto b = LogAmplitudeSpectrogram(std::span<const float>(gen.samples.data(), n));
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

/// Mel-cepstral distortion in dB over cepstra 1..39 (or 0..39 with
/// include_c0).
inline double Mcd(const AcousticFeatureSequence &ref, const AcousticFeatureSequence &gen, bool include_c0 = false) {
  const Index n = static_cast<Index>(
      TrimmedLength(ref.num_frames(), gen.num_frames(), kFrameTrimTolerance, "mcd"));
  Require(n > 0, ErrorCode::kDegenerate, "mcd: no frames");
  const double k = 10.0 * std::numbers::sqrt2 / std::numbers::ln10;
  const int first = include_c0 ? 0 : 1;
  double total = 0.0;
  for (Index t = 0; t < n; ++t) {
    double sq = 0.0;
    for (int d = first; d < kNumCepstra; ++d) {
      const double diff = static_cast<double>(ref.frames(t, d)) - gen.frames(t, d);
      sq += diff * diff;
    }
    total += k * std::sqrt(sq);
  }
  return total / static_cast<double>(n);
}

struct F0Error {
  double rmse_cent = 0.0;
  size_t voiced_frames = 0;  // frames voiced in both tracks
  bool defined() const { return voiced_frames > 0; }
};

/// RMSE of 1200*log2(f_gen/f_ref) over frames voiced in both tracks.
inline F0Error RmseF0(const F0Track &ref, const F0Track &gen) {
  const size_t n = TrimmedLength(ref.size(), gen.size(), kFrameTrimTolerance, "rmse_f0");
  double sq = 0.0;
  F0Error e;
  for (size_t t = 0; t < n; ++t) {
    if (!ref.vuv[t] || !gen.vuv[t]) continue;
    const double c = 1200.0 * std::log2(gen.f0_hz[t] / ref.f0_hz[t]);
    sq += c * c;
    ++e.voiced_frames;
  }
  e.rmse_cent = e.voiced_frames ? std::sqrt(sq / static_cast<double>(e.voiced_frames)) : 0.0;
  return e;
}

inline double VuvErrorRate(std::span<const int> ref, std::span<const int> gen) {
  const size_t n = TrimmedLength(ref.size(), gen.size(), kFrameTrimTolerance, "vuv_error_rate");
  Require(n > 0, ErrorCode::kDegenerate, "vuv_error_rate: no frames");
  size_t wrong = 0;
  for (size_t t = 0; t < n; ++t) wrong += (ref[t] != 0) != (gen[t] != 0) ? 1 : 0;
  return static_cast<double>(wrong) / static_cast<double>(n);
}

struct Trial {
  double score = 0.0;
  bool is_target = false;
};

/// Equal error rate. A trial is accepted when score >= threshold; thresholds
/// sweep the sorted unique scores plus +inf, and the FAR/FRR crossing is
/// linearly interpolated between adjacent operating points.
inline double Eer(std::span<const Trial> trials) {
  size_t n_target = 0, n_nontarget = 0;
  std::vector<double> scores;
  for (const auto &t : trials) {
    (t.is_target ? n_target : n_nontarget) += 1;
    scores.push_back(t.score);
  }
  Require(n_target > 0 && n_nontarget > 0, ErrorCode::kDegenerate, "eer needs target and non-target trials");
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());

  std::vector<Trial> sorted(trials.begin(), trials.end());
  std::sort(sorted.begin(), sorted.end(), [](const Trial &a, const Trial &b) { return a.score < b.score; });
  // Walk thresholds upward; trials strictly below the threshold are rejected.
  double prev_far = 1.0, prev_frr = 0.0;
  size_t idx = 0, rejected_targets = 0, rejected_nontargets = 0;
  for (size_t s = 0; s <= scores.size(); ++s) {
    const double threshold = s < scores.size() ? scores[s] : std::numeric_limits<double>::infinity();
    while (idx < sorted.size() && sorted[idx].score < threshold) {
      (sorted[idx].is_target ? rejected_targets : rejected_nontargets) += 1;
      ++idx;
    }
    const double far = 1.0 - static_cast<double>(rejected_nontargets) / static_cast<double>(n_nontarget);
    const double frr = static_cast<double>(rejected_targets) / static_cast<double>(n_target);
    const double d = frr - far;
    if (d == 0.0) return far;
    if (d > 0.0) {
      const double d_prev = prev_frr - prev_far;  // < 0
      const double alpha = d_prev / (d_prev - d);
      return prev_far + alpha * (far - prev_far);
    }
    prev_far = far;
    prev_frr = frr;
  }
  return prev_far;  // unreachable: at +inf FRR = 1 > FAR = 0
}

/// Pairs every test embedding with every enrolled speaker centroid.
inline std::vector<Trial> BuildTrials(const std::map<std::string, SpeakerEmbedding> &centroids,
                                      const std::vector<std::pair<std::string, SpeakerEmbedding>> &tests) {
  std::vector<Trial> trials;
  for (const auto &[speaker, emb] : tests)
    for (const auto &[enrolled, c] : centroids)
      trials.push_back({Cosine(emb.values, c.values), speaker == enrolled});
  return trials;
}

struct Correlation {
  double coefficient = 0.0;
  double p_value = 1.0;
};

/// Two-sided Student-t p-value for a correlation r over n samples, using
/// P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2).
inline double CorrelationPValue(double r, size_t n) {
  const double df = static_cast<double>(n) - 2.0;
  if (std::fabs(r) >= 1.0) return 0.0;
  const double t2 = r * r * df / (1.0 - r * r);
  return boost::math::ibeta(df / 2.0, 0.5, df / (df + t2));
}

inline Correlation Pearson(std::span<const double> x, std::span<const double> y) {
  Require(x.size() == y.size(), ErrorCode::kLengthMismatch, "pearson: length mismatch");
  Require(x.size() >= 3, ErrorCode::kInsufficientData, "pearson: need n >= 3");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  Require(sxx > 0.0 && syy > 0.0, ErrorCode::kDegenerate, "pearson: zero variance");
  Correlation c;
  c.coefficient = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  c.p_value = CorrelationPValue(c.coefficient, x.size());
  return c;
}

inline const std::vector<std::string> &MetricNames() {
  static const std::vector<std::string> names{"snr_db", "rmse_las_db", "mcd_db", "rmse_f0_cent", "vuv_error_rate"};
  return names;
}

struct UtteranceMetrics {
  std::string utterance_id;
  double duration_s = 0.0;
  double snr_db = 0.0;
  double rmse_las_db = 0.0;
  double mcd_db = 0.0;
  double rmse_f0_cent = 0.0;
  bool f0_defined = true;
  double vuv_error_rate = 0.0;

  double Get(const std::string &name) const {
    if (name == "snr_db") return snr_db;
    if (name == "rmse_las_db") return rmse_las_db;
    if (name == "mcd_db") return mcd_db;
    if (name == "rmse_f0_cent") return rmse_f0_cent;
    if (name == "vuv_error_rate") return vuv_error_rate;
    Fail(ErrorCode::kInvalidArgument, "unknown metric " + name);
  }
};

/// Metrics for one reference/generated pair already cut to the same span.
inline UtteranceMetrics EvaluatePair(const std::string &id, const Waveform &ref, const Waveform &gen,
                                     bool mcd_include_c0 = false) {
  UtteranceMetrics m;
  m.utterance_id = id;
  m.duration_s = ref.duration_seconds();
  m.snr_db = Snr(ref, gen);
  m.rmse_las_db = RmseLas(ref, gen);
  const auto fr = ExtractFeatures(ref), fg = ExtractFeatures(gen);
  m.mcd_db = Mcd(fr, fg, mcd_include_c0);
  const auto f0 = RmseF0(F0FromFeatures(fr), F0FromFeatures(fg));
  m.rmse_f0_cent = f0.rmse_cent;
  m.f0_defined = f0.defined();
  const auto tr = F0FromFeatures(fr), tg = F0FromFeatures(fg);
  m.vuv_error_rate = VuvErrorRate(tr.vuv, tg.vuv);
  return m;
}

struct MetricReport {
  std::vector<UtteranceMetrics> utterances;
  std::map<std::string, double> means;
  std::optional<double> eer;
  std::map<std::string, Correlation> duration_correlation;

  void ComputeMeans() {
    means.clear();
    for (const auto &name : MetricNames()) {
      double s = 0.0;
      size_t n = 0;
      for (const auto &u : utterances) {
        if (name == "rmse_f0_cent" && !u.f0_defined) continue;
        s += u.Get(name);
        ++n;
      }
      means[name] = n ? s / static_cast<double>(n) : 0.0;
    }
  }

  /// Pearson correlation of utterance duration against every metric.
  void ComputeDurationCorrelation() {
    duration_correlation.clear();
    std::vector<double> dur;
    for (const auto &u : utterances) dur.push_back(u.duration_s);
    for (const auto &name : MetricNames()) {
      std::vector<double> v;
      for (const auto &u : utterances) v.push_back(u.Get(name));
      try {
        duration_correlation[name] = Pearson(dur, v);
      } catch (const Error &e) {
        if (e.code() != ErrorCode::kDegenerate && e.code() != ErrorCode::kInsufficientData) throw;
        duration_correlation[name] = Correlation{0.0, 1.0};
      }
    }
  }

  // CSV layout: header row, then one "utt" row per utterance, one "mean" row,
  // an optional "eer" row and optional "corr_coef" / "corr_p" rows. Numeric
  // fields use 17 significant digits.
  std::string ToCsv() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "kind,utterance_id,duration_s,snr_db,rmse_las_db,mcd_db,rmse_f0_cent,f0_defined,vuv_error_rate\n";
    for (const auto &u : utterances)
      os << "utt," << u.utterance_id << ',' << u.duration_s << ',' << u.snr_db << ',' << u.rmse_las_db << ','
         << u.mcd_db << ',' << u.rmse_f0_cent << ',' << (u.f0_defined ? 1 : 0) << ',' << u.vuv_error_rate << '\n';
    const auto row = [&](const char *kind, const std::string &id, const auto &get) {
      os << kind << ',' << id << ',';
      os << ',' << get("snr_db") << ',' << get("rmse_las_db") << ',' << get("mcd_db") << ','
         << get("rmse_f0_cent") << ",," << get("vuv_error_rate") << '\n';
    };
    row("mean", "ALL", [&](const std::string &n) { return means.at(n); });
    if (eer) os << "eer,ALL,,,,,,," << *eer << '\n';
    if (!duration_correlation.empty()) {
      row("corr_coef", "duration", [&](const std::string &n) { return duration_correlation.at(n).coefficient; });
      row("corr_p", "duration", [&](const std::string &n) { return duration_correlation.at(n).p_value; });
    }
    return os.str();
  }

  static MetricReport FromCsv(const std::string &text) {
    MetricReport rep;
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);
    const auto split = [](const std::string &s) {
      std::vector<std::string> f;
      std::string cur;
      for (char c : s) {
        if (c == ',') {
          f.push_back(cur);
          cur.clear();
        } else {
          cur += c;
        }
      }
      f.push_back(cur);
      return f;
    };
    const auto num = [](const std::string &s) { return s.empty() ? 0.0 : std::stod(s); };
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto f = split(line);
      Require(f.size() == 9, ErrorCode::kMalformedHeader, "report csv: expected 9 fields");
      const auto &names = MetricNames();
      const std::vector<double> vals{num(f[3]), num(f[4]), num(f[5]), num(f[6]), num(f[8])};
      if (f[0] == "utt") {
        UtteranceMetrics u;
        u.utterance_id = f[1];
        u.duration_s = num(f[2]);
        u.snr_db = vals[0];
        u.rmse_las_db = vals[1];
        u.mcd_db = vals[2];
        u.rmse_f0_cent = vals[3];
        u.f0_defined = f[7] == "1";
        u.vuv_error_rate = vals[4];
        rep.utterances.push_back(u);
      } else if (f[0] == "mean") {
        for (size_t i = 0; i < names.size(); ++i) rep.means[names[i]] = vals[i];
      } else if (f[0] == "eer") {
        rep.eer = num(f[8]);
      } else if (f[0] == "corr_coef") {
        for (size_t i = 0; i < names.size(); ++i) rep.duration_correlation[names[i]].coefficient = vals[i];
      } else if (f[0] == "corr_p") {
        for (size_t i = 0; i < names.size(); ++i) rep.duration_correlation[names[i]].p_value = vals[i];
      }
    }
    return rep;
  }

  std::string ToTable() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    os << std::left << std::setw(24) << "utterance" << std::right << std::setw(10) << "SNR" << std::setw(10)
       << "LAS" << std::setw(10) << "MCD" << std::setw(10) << "F0(c)" << std::setw(10) << "V/UV%" << '\n';
    const auto line = [&](const std::string &id, double a, double b, double c, double d, double e) {
      os << std::left << std::setw(24) << id << std::right << std::setw(10) << a << std::setw(10) << b
         << std::setw(10) << c << std::setw(10) << d << std::setw(10) << 100.0 * e << '\n';
    };
    for (const auto &u : utterances)
      line(u.utterance_id, u.snr_db, u.rmse_las_db, u.mcd_db, u.rmse_f0_cent, u.vuv_error_rate);
    if (!means.empty())
      line("MEAN", means.at("snr_db"), means.at("rmse_las_db"), means.at("mcd_db"), means.at("rmse_f0_cent"),
           means.at("vuv_error_rate"));
    if (eer) os << "EER: " << 100.0 * *eer << "%\n";
    if (!duration_correlation.empty()) {
      os << "duration correlation (C, p):\n";
      for (const auto &name : MetricNames()) {
        const auto &c = duration_correlation.at(name);
        os << "  " << std::left << std::setw(16) << name << std::right << std::setw(8) << c.coefficient
           << std::setw(10) << c.p_value << '\n';
      }
    }
    return os.str();
  }
};

}  // namespace osa
