// osa/speaker_encoder.hpp

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

// d-vector speaker encoder: a stack of projected LSTM layers whose last-frame
// output, L2-normalized, is the window embedding. Utterance embeddings average
// the embeddings of half-overlapping windows and renormalize. Training uses
// the GE2E softmax loss.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "osa/config_map.hpp"
#include "osa/error.hpp"
#include "osa/features.hpp"
#include "osa/nn/checkpoint.hpp"
#include "osa/nn/lstm.hpp"
#include "osa/nn/ops.hpp"
#include "osa/nn/parameters.hpp"

namespace osa {

struct EncoderConfig {
  int input_dim = kFeatureDim;
  int num_layers = 3;
  int cell_size = 768;
  int proj_size = 256;
  int window_frames = 160;
  int hop_frames = 80;
  int min_frames = 40;
  double init_scale = 10.0;
  double init_bias = -5.0;

  int embedding_dim() const { return proj_size; }

  nn::Metadata ToMeta() const {
    return {{"model", "speaker-encoder"},
            {"encoder.input_dim", std::to_string(input_dim)},
            {"encoder.num_layers", std::to_string(num_layers)},
            {"encoder.cell_size", std::to_string(cell_size)},
            {"encoder.proj_size", std::to_string(proj_size)},
            {"encoder.window_frames", std::to_string(window_frames)},
            {"encoder.hop_frames", std::to_string(hop_frames)},
            {"encoder.min_frames", std::to_string(min_frames)}};
  }

  static EncoderConfig FromMeta(const nn::Metadata &meta) {
    Require(MetaValue(meta, "model") == "speaker-encoder", ErrorCode::kIncompatibleCheckpoint,
            "checkpoint is not a speaker encoder (model=" + MetaValue(meta, "model") + ")");
    EncoderConfig c;
    c.input_dim = std::stoi(MetaValue(meta, "encoder.input_dim"));
    c.num_layers = std::stoi(MetaValue(meta, "encoder.num_layers"));
    c.cell_size = std::stoi(MetaValue(meta, "encoder.cell_size"));
    c.proj_size = std::stoi(MetaValue(meta, "encoder.proj_size"));
    c.window_frames = std::stoi(MetaValue(meta, "encoder.window_frames"));
    c.hop_frames = std::stoi(MetaValue(meta, "encoder.hop_frames"));
    c.min_frames = std::stoi(MetaValue(meta, "encoder.min_frames"));
    return c;
  }
};

/// Unit-norm d-vector.
struct SpeakerEmbedding {
  std::vector<float> values;

  size_t dim() const { return values.size(); }
  double Norm() const {
    double s = 0.0;
    for (float v : values) s += static_cast<double>(v) * v;
    return std::sqrt(s);
  }
};

inline double Cosine(std::span<const float> a, std::span<const float> b) {
  Require(a.size() == b.size(), ErrorCode::kShapeMismatch, "cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  return dot / std::max(std::sqrt(na * nb), 1e-24);
}

inline SpeakerEmbedding NormalizedMean(const std::vector<SpeakerEmbedding> &items) {
  Require(!items.empty(), ErrorCode::kInsufficientData, "mean of zero embeddings");
  std::vector<double> acc(items.front().dim(), 0.0);
  for (const auto &e : items) {
    Require(e.dim() == acc.size(), ErrorCode::kShapeMismatch, "embedding dimension mismatch");
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += e.values[i];
  }
  double n = 0.0;
  for (double v : acc) n += v * v;
  n = std::max(std::sqrt(n), 1e-12);
  SpeakerEmbedding out;
  for (double v : acc) out.values.push_back(static_cast<float>(v / n));
  return out;
}

/// GE2E softmax loss over a speaker-major batch: row j*M + i holds utterance
/// i of speaker j. Similarities are w*cos(e_ji, c_k) + b with c_j computed
/// without e_ji. Returns the mean over all N*M rows.
template <typename S>
nn::Tensor<S> Ge2eLoss(nn::Tape<S> &tape, const nn::Tensor<S> &embeddings, Index num_speakers,
                       Index utts_per_speaker, const nn::Tensor<S> &scale, const nn::Tensor<S> &bias) {
  const Index N = num_speakers, M = utts_per_speaker, D = embeddings.cols();
  Require(N >= 2 && M >= 2, ErrorCode::kInsufficientData, "GE2E needs N >= 2 speakers and M >= 2 utterances");
  Require(embeddings.rows() == N * M, ErrorCode::kShapeMismatch, "GE2E: embedding rows != N*M");
  Require(scale.size() == 1 && bias.size() == 1, ErrorCode::kShapeMismatch, "GE2E: w and b must be scalars");
  const auto &E = embeddings.value();
  const S w = scale.item(), b = bias.item();

  RowMatrix<S> sums = RowMatrix<S>::Zero(N, D);
  for (Index j = 0; j < N; ++j) sums.row(j) = E.middleRows(j * M, M).colwise().sum();
  RowMatrix<S> centroids = sums / static_cast<S>(M);
  ColVector<S> e_norm = E.rowwise().norm().cwiseMax(S(1e-12));
  ColVector<S> c_norm = centroids.rowwise().norm().cwiseMax(S(1e-12));

  // cos[ji, k]; the own-speaker column uses the exclusive centroid.
  RowMatrix<S> cos(N * M, N), excl(N * M, D);
  ColVector<S> excl_norm(N * M);
  for (Index j = 0; j < N; ++j) {
    for (Index i = 0; i < M; ++i) {
      const Index r = j * M + i;
      excl.row(r) = (sums.row(j) - E.row(r)) / static_cast<S>(M - 1);
      excl_norm(r) = std::max(excl.row(r).norm(), S(1e-12));
      for (Index k = 0; k < N; ++k) {
        if (k == j)
          cos(r, k) = E.row(r).dot(excl.row(r)) / (e_norm(r) * excl_norm(r));
        else
          cos(r, k) = E.row(r).dot(centroids.row(k)) / (e_norm(r) * c_norm(k));
      }
    }
  }
  RowMatrix<S> sim = (w * cos.array() + b).matrix();
  RowMatrix<S> soft(N * M, N);
  double total = 0.0;
  for (Index r = 0; r < N * M; ++r) {
    const S mx = sim.row(r).maxCoeff();
    soft.row(r) = (sim.row(r).array() - mx).exp().matrix();
    const S z = soft.row(r).sum();
    soft.row(r) /= z;
    total += static_cast<double>(mx + std::log(z) - sim(r, r / M));
  }
  const bool tracked = tape.Tracks(embeddings, scale, bias);
  nn::Tensor<S> out = nn::Tensor<S>::Scalar(static_cast<S>(total / static_cast<double>(N * M)), tracked);
  if (!tracked) return out;

  tape.Record([embeddings, scale, bias, out, N, M, D, w, cos = std::move(cos), soft = std::move(soft),
               centroids = std::move(centroids), excl = std::move(excl), e_norm = std::move(e_norm),
               c_norm = std::move(c_norm), excl_norm = std::move(excl_norm)] {
    const auto &E = embeddings.value();
    RowMatrix<S> g = soft * (out.grad()(0, 0) / static_cast<S>(N * M));
    for (Index r = 0; r < N * M; ++r) g(r, r / M) -= out.grad()(0, 0) / static_cast<S>(N * M);
    if (scale.requires_grad()) scale.grad()(0, 0) += g.cwiseProduct(cos).sum();
    if (bias.requires_grad()) bias.grad()(0, 0) += g.sum();
    if (!embeddings.requires_grad()) return;

    RowMatrix<S> dE = RowMatrix<S>::Zero(N * M, D);
    RowMatrix<S> d_centroid = RowMatrix<S>::Zero(N, D);
    RowMatrix<S> d_excl_sum = RowMatrix<S>::Zero(N, D);
    for (Index r = 0; r < N * M; ++r) {
      const Index j = r / M;
      const RowVector<S> e_hat = E.row(r) / e_norm(r);
      for (Index k = 0; k < N; ++k) {
        const S dcos = g(r, k) * w;
        const S c = cos(r, k);
        if (k == j) {
          const RowVector<S> x_hat = excl.row(r) / excl_norm(r);
          dE.row(r) += dcos * (x_hat - c * e_hat) / e_norm(r);
          const RowVector<S> dx = dcos * (e_hat - c * x_hat) / excl_norm(r) / static_cast<S>(M - 1);
          d_excl_sum.row(j) += dx;
          dE.row(r) -= dx;
        } else {
          const RowVector<S> c_hat = centroids.row(k) / c_norm(k);
          dE.row(r) += dcos * (c_hat - c * e_hat) / e_norm(r);
          d_centroid.row(k) += dcos * (e_hat - c * c_hat) / c_norm(k) / static_cast<S>(M);
        }
      }
    }
    for (Index j = 0; j < N; ++j)
      dE.middleRows(j * M, M).rowwise() += d_centroid.row(j) + d_excl_sum.row(j);
    embeddings.grad() += dE;
  });
  return out;
}

template <typename S>
class SpeakerEncoder {
 public:
  explicit SpeakerEncoder(const EncoderConfig &cfg, uint64_t seed = 0) : cfg_(cfg) {
    Require(cfg.num_layers >= 1 && cfg.cell_size >= 1 && cfg.proj_size >= 1, ErrorCode::kInvalidArgument,
            "encoder: bad layer sizes");
    std::mt19937_64 rng(seed);
    const Index H = cfg.cell_size, P = cfg.proj_size;
    for (int l = 0; l < cfg.num_layers; ++l) {
      const Index in = l == 0 ? cfg.input_dim : P;
      const std::string pre = "lstm" + std::to_string(l) + ".";
      nn::LstmLayerParams<S> p;
      p.w_input = store_.Add(pre + "w_input", {in, 4 * H});
      p.w_recurrent = store_.Add(pre + "w_recurrent", {P, 4 * H});
      p.bias = store_.Add(pre + "bias", {4 * H});
      p.w_proj = store_.Add(pre + "w_proj", {H, P});
      nn::InitFanIn(p.w_input, in + P, rng);
      nn::InitFanIn(p.w_recurrent, in + P, rng);
      nn::InitFanIn(p.w_proj, H, rng);
      p.bias.mutable_value().middleCols(H, H).setConstant(S(1));  // forget gate
      layers_.push_back(p);
    }
    scale_ = store_.Add("ge2e.w", {});
    bias_ = store_.Add("ge2e.b", {});
    scale_.mutable_value()(0, 0) = static_cast<S>(cfg.init_scale);
    bias_.mutable_value()(0, 0) = static_cast<S>(cfg.init_bias);
  }

  const EncoderConfig &config() const { return cfg_; }
  nn::ParameterStore<S> &store() { return store_; }
  const nn::ParameterStore<S> &store() const { return store_; }
  const nn::Tensor<S> &scale() const { return scale_; }
  const nn::Tensor<S> &bias() const { return bias_; }
  const std::vector<nn::LstmLayerParams<S>> &layers() const { return layers_; }

  /// Runs the LSTM stack over a time-major batch (T*batch rows) and returns
  /// the L2-normalized last-frame outputs, [batch x P].
  nn::Tensor<S> Forward(nn::Tape<S> &tape, const nn::Tensor<S> &frames, Index batch) const {
    Require(frames.cols() == cfg_.input_dim, ErrorCode::kShapeMismatch,
            "encoder: input dim " + std::to_string(frames.cols()) + ", expected " + std::to_string(cfg_.input_dim));
    nn::Tensor<S> h = frames;
    for (const auto &layer : layers_) h = nn::LstmProjected(tape, h, batch, layer).first;
    const Index T = frames.rows() / batch;
    return nn::L2NormalizeRows(tape, nn::SliceRows(tape, h, (T - 1) * batch, batch));
  }

  /// Stacks equal-length segments into the time-major layout.
  static RowMatrix<S> TimeMajor(const std::vector<RowMatrix<float>> &segments) {
    const Index B = static_cast<Index>(segments.size());
    const Index T = segments.front().rows(), D = segments.front().cols();
    RowMatrix<S> x(T * B, D);
    for (Index b = 0; b < B; ++b) {
      Require(segments[b].rows() == T && segments[b].cols() == D, ErrorCode::kShapeMismatch,
              "segments must share a shape");
      for (Index t = 0; t < T; ++t) x.row(t * B + b) = segments[b].row(t).template cast<S>();
    }
    return x;
  }

  std::vector<SpeakerEmbedding> EncodeSegments(const std::vector<RowMatrix<float>> &segments) const {
    nn::Tape<S> tape(false);
    const auto x = nn::Tensor<S>::FromMatrix(TimeMajor(segments));
    const auto e = Forward(tape, x, static_cast<Index>(segments.size())).value();
    std::vector<SpeakerEmbedding> out(segments.size());
    for (Index b = 0; b < e.rows(); ++b)
      for (Index d = 0; d < e.cols(); ++d) out[b].values.push_back(static_cast<float>(e(b, d)));
    return out;
  }

  /// Embedding of exactly one analysis window.
  SpeakerEmbedding EncodeWindow(const RowMatrix<float> &segment) const {
    Require(segment.rows() == cfg_.window_frames, ErrorCode::kShapeMismatch,
            "window must have " + std::to_string(cfg_.window_frames) + " frames, got " +
                std::to_string(segment.rows()));
    return EncodeSegments({segment}).front();
  }

  /// Start frames of the sliding windows used for an utterance of n frames.
  /// Windows hop by hop_frames; when the hop grid leaves trailing frames
  /// uncovered, one extra window aligned to the end is added. Utterances
  /// shorter than a window use one window spanning the whole utterance.
  std::vector<Index> WindowStarts(Index n) const {
    const Index W = cfg_.window_frames, hop = cfg_.hop_frames;
    if (n < W) return {0};
    std::vector<Index> starts;
    for (Index s = 0; s + W <= n; s += hop) starts.push_back(s);
    if (starts.back() + W < n) starts.push_back(n - W);
    return starts;
  }

  SpeakerEmbedding EmbedUtterance(const RowMatrix<float> &frames) const {
    const Index n = frames.rows();
    Require(n >= 1, ErrorCode::kTooShort, "empty feature sequence");
    Require(n >= cfg_.min_frames, ErrorCode::kTooShort,
            "utterance of " + std::to_string(n) + " frames is below the " + std::to_string(cfg_.min_frames) +
                "-frame minimum");
    const Index W = std::min<Index>(cfg_.window_frames, n);
    std::vector<RowMatrix<float>> windows;
    for (Index s : WindowStarts(n)) windows.push_back(frames.middleRows(s, W));
    return NormalizedMean(EncodeSegments(windows));
  }

  /// Keeps the GE2E scale strictly positive.
  void ClampScale() {
    auto &w = scale_.mutable_value()(0, 0);
    w = std::max(w, S(1e-4));
  }

 private:
  EncoderConfig cfg_;
  nn::ParameterStore<S> store_;
  std::vector<nn::LstmLayerParams<S>> layers_;
  nn::Tensor<S> scale_, bias_;
};

/// Normalized feature matrices grouped by speaker.
struct SpeakerCorpus {
  std::vector<std::string> speaker_ids;
  std::vector<std::vector<RowMatrix<float>>> utterances;
};

struct EncoderTrainConfig {
  int64_t steps = 1000;
  int speakers_per_batch = 4;
  int utterances_per_speaker = 5;
  int crop_frames = 160;
  double learning_rate = 1e-3;
  double grad_clip = 3.0;
  uint64_t seed = 1;
};

/// Draws one GE2E batch: N distinct speakers, M fixed-length crops each.
/// Deterministic in (seed, step).
inline std::vector<RowMatrix<float>> SampleGe2eBatch(const SpeakerCorpus &corpus, const EncoderTrainConfig &cfg,
                                                     const std::vector<size_t> &eligible_speakers, int64_t step) {
  std::seed_seq seq{static_cast<uint64_t>(cfg.seed), static_cast<uint64_t>(step), uint64_t{0x6e32}};
  std::mt19937_64 rng(seq);
  std::vector<size_t> speakers = eligible_speakers;
  std::shuffle(speakers.begin(), speakers.end(), rng);
  speakers.resize(cfg.speakers_per_batch);
  std::vector<RowMatrix<float>> crops;
  for (size_t s : speakers) {
    std::vector<size_t> pool;
    for (size_t u = 0; u < corpus.utterances[s].size(); ++u)
      if (corpus.utterances[s][u].rows() >= cfg.crop_frames) pool.push_back(u);
    std::vector<size_t> picks;
    if (static_cast<int>(pool.size()) >= cfg.utterances_per_speaker) {
      std::shuffle(pool.begin(), pool.end(), rng);
      picks.assign(pool.begin(), pool.begin() + cfg.utterances_per_speaker);
    } else {
      std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
      for (int i = 0; i < cfg.utterances_per_speaker; ++i) picks.push_back(pool[pick(rng)]);
    }
    for (size_t u : picks) {
      const auto &frames = corpus.utterances[s][u];
      std::uniform_int_distribution<Index> off(0, frames.rows() - cfg.crop_frames);
      crops.push_back(frames.middleRows(off(rng), cfg.crop_frames));
    }
  }
  return crops;
}

/// Speakers with at least two croppable utterances (or one long enough to
/// yield distinct crops when sampled with replacement).
inline std::vector<size_t> EligibleSpeakers(const SpeakerCorpus &corpus, int crop_frames) {
  std::vector<size_t> out;
  for (size_t s = 0; s < corpus.utterances.size(); ++s) {
    int usable = 0;
    for (const auto &u : corpus.utterances[s]) usable += u.rows() >= crop_frames ? 1 : 0;
    if (usable >= 2) out.push_back(s);
  }
  return out;
}

using StepCallback = std::function<void(int64_t step, double loss)>;

/// GE2E training; returns the per-step losses.
template <typename S>
std::vector<double> TrainEncoder(SpeakerEncoder<S> &encoder, const SpeakerCorpus &corpus,
                                 const EncoderTrainConfig &cfg, const StepCallback &on_step = {}) {
  Require(cfg.speakers_per_batch >= 2 && cfg.utterances_per_speaker >= 2, ErrorCode::kInsufficientData,
          "GE2E batches need N >= 2 and M >= 2");
  const auto eligible = EligibleSpeakers(corpus, cfg.crop_frames);
  Require(eligible.size() >= 2, ErrorCode::kInsufficientData,
          "need >= 2 speakers with >= 2 segments of " + std::to_string(cfg.crop_frames) + " frames, found " +
              std::to_string(eligible.size()));
  Require(static_cast<int>(eligible.size()) >= cfg.speakers_per_batch, ErrorCode::kInsufficientData,
          "corpus has " + std::to_string(eligible.size()) + " eligible speakers, batch needs " +
              std::to_string(cfg.speakers_per_batch));
  std::vector<double> losses;
  auto &store = encoder.store();
  for (int64_t i = 0; i < cfg.steps; ++i) {
    const int64_t step = store.step_count();
    const auto crops = SampleGe2eBatch(corpus, cfg, eligible, step);
    nn::Tape<S> tape;
    store.ZeroGrad();
    const auto x = nn::Tensor<S>::FromMatrix(SpeakerEncoder<S>::TimeMajor(crops));
    const auto emb = encoder.Forward(tape, x, static_cast<Index>(crops.size()));
    const auto loss = Ge2eLoss(tape, emb, cfg.speakers_per_batch, cfg.utterances_per_speaker, encoder.scale(),
                               encoder.bias());
    tape.Backward(loss);
    nn::ClipGradNorm(store, cfg.grad_clip);
    nn::AdamStep(store, cfg.learning_rate);
    encoder.ClampScale();
    losses.push_back(static_cast<double>(loss.item()));
    if (on_step) on_step(store.step_count(), losses.back());
  }
  return losses;
}

template <typename S>
nn::Checkpoint EncoderCheckpoint(const SpeakerEncoder<S> &encoder, bool with_moments = true) {
  return nn::CaptureCheckpoint(encoder.store(), encoder.config().ToMeta(), with_moments);
}

template <typename S>
SpeakerEncoder<S> EncoderFromCheckpoint(const nn::Checkpoint &ck) {
  SpeakerEncoder<S> enc(EncoderConfig::FromMeta(ck.meta));
  nn::RestoreCheckpoint(ck, enc.store());
  return enc;
}

}  // namespace osa
