// osa/pipeline/commands.hpp

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

// End-to-end commands. Each one validates its inputs completely before it
// creates any output, writes every file atomically, and produces the same
// bytes for the same inputs and configuration.

#pragma once

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "osa/audio_io.hpp"
#include "osa/error.hpp"
#include "osa/eval.hpp"
#include "osa/features.hpp"
#include "osa/fileio.hpp"
#include "osa/generation.hpp"
#include "osa/nn/checkpoint.hpp"
#include "osa/pipeline/embedding_file.hpp"
#include "osa/pipeline/manifest.hpp"
#include "osa/pipeline/run_config.hpp"
#include "osa/pipeline/toy_corpus.hpp"
#include "osa/speaker_encoder.hpp"
#include "osa/vocoder_training.hpp"
#include "osa/wavenet.hpp"

namespace osa::pipeline {

namespace fs = std::filesystem;

inline constexpr const char *kWorkersEnv = "OSA_NUM_WORKERS";
inline constexpr const char *kStatsMetaKey = "features.stats";

/// Worker count from OSA_NUM_WORKERS; 1 when unset.
inline int WorkerCount() {
  const char *env = std::getenv(kWorkersEnv);
  if (!env || !*env) return 1;
  char *end = nullptr;
  const long n = std::strtol(env, &end, 10);
  Require(end && *end == '\0' && n >= 1 && n <= 256, ErrorCode::kInvalidArgument,
          std::string(kWorkersEnv) + " must be an integer in [1, 256]");
  return static_cast<int>(n);
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Every index runs
/// even if some fail; the first failure (lowest index) is rethrown.
template <typename Fn>
void ParallelFor(size_t n, int workers, Fn &&fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto run = [&](size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (workers <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min<int>(workers, static_cast<int>(n)); ++w)
      pool.emplace_back([&] {
        for (size_t i = next++; i < n; i = next++) run(i);
      });
    for (auto &t : pool) t.join();
  }
  for (auto &e : errors)
    if (e) std::rethrow_exception(e);
}

inline void Log(const std::string &msg) { std::cerr << "[osa] " << msg << '\n'; }

inline std::string Hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline uint64_t HashBytes(const std::vector<char> &b) { return Fnv1a64(std::string_view(b.data(), b.size())); }

inline FeatureStats StatsFromMeta(const nn::Metadata &meta) {
  auto it = meta.find(kStatsMetaKey);
  Require(it != meta.end(), ErrorCode::kIncompatibleCheckpoint, "checkpoint carries no normalization stats");
  return FeatureStats::FromText(it->second);
}

inline RowMatrix<float> NormalizedFeatures(const fs::path &feature_path, const FeatureStats &stats) {
  return stats.Apply(ReadFeatures(feature_path).frames);
}

// ---------------------------------------------------------------------------
// make-toy-corpus

/// Writes wav/<utt>.wav and manifest.txt under out_dir.
inline Manifest MakeToyCorpusCommand(const fs::path &out_dir, const ToyCorpusConfig &cfg) {
  const auto corpus = MakeToyCorpus(cfg);
  fs::create_directories(out_dir / "wav");
  Manifest m;
  for (const auto &u : corpus) {
    const auto path = out_dir / "wav" / (u.utterance_id + ".wav");
    WriteWav(path, u.waveform);
    m.records.push_back({u.utterance_id, u.speaker_id, ParseSplit(u.split), path, {}, {}});
  }
  WriteManifest(out_dir / "manifest.txt", m);
  return m;
}

// ---------------------------------------------------------------------------
// extract-features

struct ExtractResult {
  Manifest manifest;  // successful records, with feature paths
  FeatureStats stats;
  std::vector<std::pair<std::string, std::string>> failures;  // (utterance id, error)
};

/// Writes <utt>.feat, stats.txt, manifest.txt and, when something failed,
/// failures.txt under out_dir. Stats cover the train split (every successful
/// record when the manifest has no train split).
inline ExtractResult ExtractFeaturesCommand(const Manifest &in, const fs::path &out_dir, int workers) {
  ValidateManifest(in);
  fs::create_directories(out_dir);
  const size_t n = in.records.size();
  std::vector<std::optional<AcousticFeatureSequence>> feats(n);
  std::vector<std::string> errors(n);
  ParallelFor(n, workers, [&](size_t i) {
    const auto &r = in.records[i];
    try {
      auto f = ExtractFeatures(ReadWav(r.audio_path));
      WriteFeatures(out_dir / (r.utterance_id + ".feat"), f);
      feats[i] = std::move(f);
    } catch (const std::exception &e) {
      errors[i] = e.what();
    }
  });
  ExtractResult res;
  std::vector<const AcousticFeatureSequence *> train, all;
  for (size_t i = 0; i < n; ++i) {
    const auto &r = in.records[i];
    if (!feats[i]) {
      res.failures.emplace_back(r.utterance_id, errors[i]);
      continue;
    }
    auto rec = r;
    rec.feature_path = out_dir / (r.utterance_id + ".feat");
    res.manifest.records.push_back(rec);
    all.push_back(&*feats[i]);
    if (r.split == Split::kTrain) train.push_back(&*feats[i]);
  }
  const auto failures_path = out_dir / "failures.txt";
  if (!res.failures.empty()) {
    std::string report;
    for (const auto &[id, err] : res.failures) report += id + "\t" + err + "\n";
    WriteFileAtomic(failures_path, report);
  } else if (fs::exists(failures_path)) {
    fs::remove(failures_path);
  }
  Require(!all.empty(), ErrorCode::kInsufficientData, "feature extraction failed for every utterance");
  res.stats = FeatureStats::Compute(train.empty() ? all : train);
  WriteFileAtomic(out_dir / "stats.txt", res.stats.ToText());
  WriteManifest(out_dir / "manifest.txt", res.manifest);
  return res;
}

// ---------------------------------------------------------------------------
// train-encoder

inline SpeakerCorpus EncoderCorpus(const Manifest &m, const FeatureStats &stats) {
  SpeakerCorpus corpus;
  std::map<std::string, size_t> index;
  for (const auto *r : m.InSplit(Split::kTrain)) {
    auto [it, fresh] = index.emplace(r->speaker_id, corpus.speaker_ids.size());
    if (fresh) {
      corpus.speaker_ids.push_back(r->speaker_id);
      corpus.utterances.emplace_back();
    }
    corpus.utterances[it->second].push_back(NormalizedFeatures(r->feature_path, stats));
  }
  return corpus;
}

struct TrainingLog {
  std::vector<double> losses;
  std::string ToText() const {
    std::string out;
    char buf[64];
    for (size_t i = 0; i < losses.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%zu %.9g\n", i + 1, losses[i]);
      out += buf;
    }
    return out;
  }
};

/// Trains the encoder on the train split; writes the checkpoint and a
/// per-step loss log (<checkpoint>.loss.txt).
inline TrainingLog TrainEncoderCommand(const Manifest &m, const FeatureStats &stats, const RunConfig &cfg,
                                       const fs::path &out_checkpoint) {
  ValidateManifest(m, {.features = true});
  const auto corpus = EncoderCorpus(m, stats);
  SpeakerEncoder<float> enc(cfg.encoder, cfg.model_seed);
  TrainingLog log;
  log.losses = TrainEncoder(enc, corpus, cfg.encoder_train, [&](int64_t step, double loss) {
    if (step % 50 == 0) Log("encoder step " + std::to_string(step) + " loss " + std::to_string(loss));
  });
  auto ck = EncoderCheckpoint(enc);
  ck.meta[kStatsMetaKey] = stats.ToText();
  if (out_checkpoint.has_parent_path()) fs::create_directories(out_checkpoint.parent_path());
  nn::WriteCheckpoint(out_checkpoint, ck);
  WriteFileAtomic(fs::path(out_checkpoint.string() + ".loss.txt"), log.ToText());
  return log;
}

// ---------------------------------------------------------------------------
// embed

struct LoadedEncoder {
  SpeakerEncoder<float> encoder;
  FeatureStats stats;
  uint64_t hash = 0;
};

inline LoadedEncoder LoadEncoder(const fs::path &path) {
  const auto bytes = ReadFileBytes(path);
  const auto ck = nn::DecodeCheckpoint(bytes, path.string());
  return {EncoderFromCheckpoint<float>(ck), StatsFromMeta(ck.meta), HashBytes(bytes)};
}

/// Writes <utt>.emb for every record plus manifest.txt with embedding paths.
inline Manifest EmbedCommand(const Manifest &in, const fs::path &encoder_checkpoint, const fs::path &out_dir,
                             int workers) {
  ValidateManifest(in, {.features = true});
  Require(fs::exists(encoder_checkpoint), ErrorCode::kIo,
          "encoder checkpoint '" + encoder_checkpoint.string() + "' does not exist");
  const auto loaded = LoadEncoder(encoder_checkpoint);
  fs::create_directories(out_dir);
  Manifest out = in;
  ParallelFor(in.records.size(), workers, [&](size_t i) {
    auto &r = out.records[i];
    EmbeddingRecord rec{r.utterance_id,
                        loaded.encoder.EmbedUtterance(NormalizedFeatures(r.feature_path, loaded.stats))};
    r.embedding_path = out_dir / (r.utterance_id + ".emb");
    WriteEmbedding(r.embedding_path, rec);
  });
  WriteManifest(out_dir / "manifest.txt", out);
  return out;
}

// ---------------------------------------------------------------------------
// train-vocoder / fine-tune

/// Aligned (waveform span, condition) pairs for one split.
inline std::vector<VocoderExample> LoadVocoderExamples(const Manifest &m, Split split, const FeatureStats &stats,
                                                       const WaveNetConfig &cfg) {
  std::vector<VocoderExample> out;
  for (const auto *r : m.InSplit(split)) {
    const auto feats = ReadFeatures(r->feature_path);
    const auto wav = ReadWav(r->audio_path);
    VocoderExample ex;
    ex.id = r->utterance_id;
    ex.quantized = MulawEncode(VocoderTargetSpan(wav, feats.num_frames(), feats.window_size_samples,
                                                 feats.frame_shift_samples))
                       .indices;
    std::vector<float> emb;
    if (cfg.mode == VocoderMode::kSpeakerAware) emb = ReadEmbedding(r->embedding_path).embedding.values;
    ex.cond_input = ConditionInput(cfg, stats.Apply(feats.frames), emb);
    out.push_back(std::move(ex));
  }
  Require(!out.empty(), ErrorCode::kInsufficientData, "no " + SplitName(split) + " records for vocoder training");
  return out;
}

inline void SaveVocoder(const WaveNet<float> &model, const FeatureStats &stats, const fs::path &path) {
  auto ck = VocoderCheckpoint(model);
  ck.meta[kStatsMetaKey] = stats.ToText();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  nn::WriteCheckpoint(path, ck);
}

/// Trains (or, with `resume`, continues training) a vocoder on the train
/// split. Writes the checkpoint every `checkpoint_every` steps and at the end.
inline TrainingLog TrainVocoderCommand(const Manifest &m, const FeatureStats &stats, const RunConfig &cfg,
                                       VocoderMode mode, const fs::path &out_checkpoint,
                                       const fs::path &resume = {}) {
  ValidateManifest(m, {.features = true, .embeddings = mode == VocoderMode::kSpeakerAware});
  std::optional<WaveNet<float>> model;
  FeatureStats use_stats = stats;
  if (!resume.empty()) {
    const auto ck = nn::ReadCheckpoint(resume);
    model.emplace(VocoderFromCheckpoint<float>(ck, &mode));
    use_stats = StatsFromMeta(ck.meta);
  } else {
    model.emplace(cfg.Vocoder(mode), cfg.model_seed);
  }
  const auto examples = LoadVocoderExamples(m, Split::kTrain, use_stats, model->config());
  TrainingLog log;
  log.losses = TrainVocoder(*model, examples, cfg.vocoder_train, [&](int64_t step, double loss) {
    if (step % 50 == 0) Log("vocoder step " + std::to_string(step) + " loss " + std::to_string(loss));
    if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) SaveVocoder(*model, use_stats, out_checkpoint);
  });
  SaveVocoder(*model, use_stats, out_checkpoint);
  WriteFileAtomic(fs::path(out_checkpoint.string() + ".loss.txt"), log.ToText());
  return log;
}

/// Fine-tunes a vocoder on the adapt split (optionally one speaker only)
/// with a fresh optimizer state.
inline TrainingLog FineTuneCommand(const Manifest &m, const fs::path &base_checkpoint, const RunConfig &cfg,
                                   const fs::path &out_checkpoint, const std::string &speaker = {}) {
  Require(fs::exists(base_checkpoint), ErrorCode::kIo,
          "base checkpoint '" + base_checkpoint.string() + "' does not exist");
  const auto ck = nn::ReadCheckpoint(base_checkpoint);
  auto model = VocoderFromCheckpoint<float>(ck);
  const auto stats = StatsFromMeta(ck.meta);
  Manifest subset;
  for (const auto &r : m.records)
    if (r.split == Split::kAdapt && (speaker.empty() || r.speaker_id == speaker)) subset.records.push_back(r);
  Require(!subset.records.empty(), ErrorCode::kInsufficientData,
          "no adapt records" + (speaker.empty() ? std::string() : " for speaker " + speaker));
  ValidateManifest(subset, {.features = true, .embeddings = model.config().mode == VocoderMode::kSpeakerAware});
  const auto examples = LoadVocoderExamples(subset, Split::kAdapt, stats, model.config());
  auto tc = cfg.vocoder_train;
  tc.steps = cfg.fine_tune_steps;
  tc.learning_rate = cfg.fine_tune_learning_rate;
  TrainingLog log;
  log.losses = FineTune(model, examples, tc);
  SaveVocoder(model, stats, out_checkpoint);
  WriteFileAtomic(fs::path(out_checkpoint.string() + ".loss.txt"), log.ToText());
  return log;
}

// ---------------------------------------------------------------------------
// copy-synthesis

/// Per-utterance generation seed; independent of processing order.
inline uint64_t UtteranceSeed(uint64_t base, const std::string &utterance_id) {
  return base ^ Fnv1a64(utterance_id);
}

struct CopySynthesisOptions {
  Split split = Split::kTest;
  int workers = 1;
};

/// For each record of the split: features from the audio, an embedding
/// (the manifest's, else computed by the encoder), generation, then
/// <utt>.wav and <utt>.json (provenance) under out_dir, plus manifest.txt
/// listing the generated audio.
inline Manifest CopySynthesisCommand(const Manifest &m, const fs::path &vocoder_checkpoint,
                                     const fs::path &encoder_checkpoint, const RunConfig &cfg,
                                     const fs::path &out_dir, const CopySynthesisOptions &opt = {}) {
  Manifest subset;
  for (const auto &r : m.records)
    if (r.split == opt.split) subset.records.push_back(r);
  Require(!subset.records.empty(), ErrorCode::kInsufficientData, "no " + SplitName(opt.split) + " records");
  ValidateManifest(subset);
  Require(fs::exists(vocoder_checkpoint), ErrorCode::kIo,
          "vocoder checkpoint '" + vocoder_checkpoint.string() + "' does not exist");
  const auto voc_bytes = ReadFileBytes(vocoder_checkpoint);
  const auto voc_ck = nn::DecodeCheckpoint(voc_bytes, vocoder_checkpoint.string());
  const auto model = VocoderFromCheckpoint<float>(voc_ck, nullptr, false);
  const auto stats = StatsFromMeta(voc_ck.meta);
  const bool aware = model.config().mode == VocoderMode::kSpeakerAware;
  bool need_encoder = false;
  for (const auto &r : subset.records) need_encoder |= aware && r.embedding_path.empty();
  std::optional<LoadedEncoder> encoder;
  if (need_encoder) {
    Require(!encoder_checkpoint.empty() && fs::exists(encoder_checkpoint), ErrorCode::kIo,
            "OSA copy synthesis needs an encoder checkpoint or manifest embeddings");
    encoder.emplace(LoadEncoder(encoder_checkpoint));
  }
  fs::create_directories(out_dir);
  Manifest out;
  out.records.resize(subset.records.size());
  ParallelFor(subset.records.size(), opt.workers, [&](size_t i) {
    const auto &r = subset.records[i];
    const auto feats = ExtractFeatures(ReadWav(r.audio_path));
    std::vector<float> emb;
    std::string emb_source = "none";
    if (aware) {
      if (!r.embedding_path.empty()) {
        emb = ReadEmbedding(r.embedding_path).embedding.values;
        emb_source = "manifest";
      } else {
        emb = encoder->encoder.EmbedUtterance(encoder->stats.Apply(feats.frames)).values;
        emb_source = "encoder";
      }
    }
    const auto cond = ConditionInput(model.config(), stats.Apply(feats.frames), emb);
    const uint64_t seed = UtteranceSeed(cfg.generation_seed, r.utterance_id);
    const auto gen = Generate(model, cond, cfg.sampling, seed);
    const auto wav_path = out_dir / (r.utterance_id + ".wav");
    WriteWav(wav_path, gen.waveform);
    nlohmann::ordered_json prov;
    prov["utterance_id"] = r.utterance_id;
    prov["mode"] = ModeName(model.config().mode);
    prov["config_hash"] = Hex64(cfg.Hash());
    prov["vocoder_checkpoint_hash"] = Hex64(HashBytes(voc_bytes));
    prov["encoder_checkpoint_hash"] = encoder ? Hex64(encoder->hash) : "";
    prov["embedding_source"] = emb_source;
    prov["generation_seed"] = cfg.generation_seed;
    prov["utterance_seed"] = seed;
    prov["sampling"] = cfg.sampling == Sampling::kArgmax ? "argmax" : "sample";
    prov["num_frames"] = feats.num_frames();
    prov["num_samples"] = gen.waveform.size();
    WriteFileAtomic(out_dir / (r.utterance_id + ".json"), prov.dump(2) + "\n");
    out.records[i] = {r.utterance_id, r.speaker_id, r.split, wav_path, {}, {}};
  });
  WriteManifest(out_dir / "manifest.txt", out);
  return out;
}

// ---------------------------------------------------------------------------
// evaluate

/// Reference audio cut to the span a generated waveform covers: unchanged
/// when the lengths already agree, otherwise the vocoder target span.
inline Waveform AlignReference(const Waveform &ref, size_t generated_samples) {
  const size_t diff = ref.size() > generated_samples ? ref.size() - generated_samples : generated_samples - ref.size();
  if (diff <= kSampleTrimTolerance) return ref;
  const Index frames = NumFrames(ref.size(), kFrameWindow, kFrameShift);
  return VocoderTargetSpan(ref, frames);
}

struct EvaluateOptions {
  Split split = Split::kTest;
  bool correlation = true;
  bool mcd_include_c0 = false;
  int workers = 1;
};

/// Pairs every reference record of the split with <gen_dir>/<utt>.wav.
/// Unpaired references fail the command before anything is computed.
inline MetricReport EvaluateCommand(const Manifest &ref, const fs::path &gen_dir, const EvaluateOptions &opt = {}) {
  Manifest subset;
  for (const auto &r : ref.records)
    if (r.split == opt.split) subset.records.push_back(r);
  Require(!subset.records.empty(), ErrorCode::kInsufficientData, "no " + SplitName(opt.split) + " records");
  ValidateManifest(subset);
  std::vector<std::string> unpaired;
  for (const auto &r : subset.records)
    if (!fs::exists(gen_dir / (r.utterance_id + ".wav"))) unpaired.push_back(r.utterance_id);
  if (!unpaired.empty()) {
    std::string msg = "unpaired utterances (no generated audio in " + gen_dir.string() + "):";
    for (const auto &u : unpaired) msg += "\n  " + u;
    Fail(ErrorCode::kValidation, msg);
  }
  MetricReport rep;
  rep.utterances.resize(subset.records.size());
  ParallelFor(subset.records.size(), opt.workers, [&](size_t i) {
    const auto &r = subset.records[i];
    const auto gen = ReadWav(gen_dir / (r.utterance_id + ".wav"));
    const auto ref_wav = AlignReference(ReadWav(r.audio_path), gen.size());
    rep.utterances[i] = EvaluatePair(r.utterance_id, ref_wav, gen, opt.mcd_include_c0);
  });
  rep.ComputeMeans();
  if (opt.correlation && rep.utterances.size() >= 3) rep.ComputeDurationCorrelation();
  return rep;
}

// ---------------------------------------------------------------------------
// eer

struct EerResult {
  double eer = 0.0;
  size_t target_trials = 0;
  size_t nontarget_trials = 0;
  double mean_target_score = 0.0;
  double mean_nontarget_score = 0.0;
};

/// Enrolls speakers from the adapt split (normalized centroid of their
/// embeddings) and scores every test embedding against every centroid.
inline EerResult EerCommand(const Manifest &m) {
  ValidateManifest(m, {.embeddings = true});
  std::map<std::string, std::vector<SpeakerEmbedding>> enroll;
  for (const auto *r : m.InSplit(Split::kAdapt))
    enroll[r->speaker_id].push_back(ReadEmbedding(r->embedding_path).embedding);
  Require(!enroll.empty(), ErrorCode::kInsufficientData, "no adapt-split records to enroll");
  std::map<std::string, SpeakerEmbedding> centroids;
  for (const auto &[spk, items] : enroll) centroids[spk] = NormalizedMean(items);
  std::vector<std::pair<std::string, SpeakerEmbedding>> tests;
  for (const auto *r : m.InSplit(Split::kTest)) tests.emplace_back(r->speaker_id, ReadEmbedding(r->embedding_path).embedding);
  const auto trials = BuildTrials(centroids, tests);
  EerResult res;
  for (const auto &t : trials) {
    if (t.is_target) {
      ++res.target_trials;
      res.mean_target_score += t.score;
    } else {
      ++res.nontarget_trials;
      res.mean_nontarget_score += t.score;
    }
  }
  res.eer = Eer(trials);
  res.mean_target_score /= static_cast<double>(res.target_trials);
  res.mean_nontarget_score /= static_cast<double>(res.nontarget_trials);
  return res;
}

}  // namespace osa::pipeline
