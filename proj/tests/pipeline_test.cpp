// tests/pipeline_test.cpp

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

#include <cstdlib>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "osa/pipeline/commands.hpp"
#include "test_support.hpp"

namespace osa::pipeline {
namespace {

namespace fs = std::filesystem;

ErrorCode CodeOf(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kIo;
}

void Touch(const fs::path &p) { WriteFileAtomic(p, std::string_view("x")); }

ToyCorpusConfig SmallCorpus() {
  ToyCorpusConfig c;
  c.num_speakers = 3;
  c.train_per_speaker = 2;
  c.adapt_per_speaker = 1;
  c.test_per_speaker = 1;
  c.min_seconds = 0.5;
  c.max_seconds = 0.6;
  return c;
}

RunConfig TinyRun() {
  auto c = RunConfig::Toy();
  c.Apply({{"wavenet.blocks", "1"},
           {"wavenet.layers_per_block", "3"},
           {"wavenet.residual_channels", "8"},
           {"wavenet.gate_channels", "8"},
           {"wavenet.skip_channels", "16"},
           {"wavenet.condition_channels", "8"},
           {"encoder.num_layers", "1"},
           {"encoder.cell_size", "16"},
           {"encoder.proj_size", "8"},
           {"encoder_train.steps", "4"},
           {"encoder_train.speakers_per_batch", "2"},
           {"encoder_train.utterances_per_speaker", "2"},
           {"encoder_train.crop_frames", "40"},
           {"vocoder_train.steps", "4"},
           {"vocoder_train.chunk_samples", "400"},
           {"vocoder_train.checkpoint_every", "0"},
           {"fine_tune.steps", "3"}});
  return c;
}

// ---- manifest -----------------------------------------------------------------

TEST(ManifestTest, ParsesFieldsCommentsAndRelativePaths) {
  const auto m = ParseManifest(
      "# comment line\n"
      "utt=a spk=s1 split=train audio=wav/a.wav features=f/a.feat\n"
      "\n"
      "  utt=b   spk=s2 split=test audio=/abs/b.wav embedding=e/b.emb\n",
      "/base");
  ASSERT_EQ(m.records.size(), 2u);
  EXPECT_EQ(m.records[0].audio_path, fs::path("/base/wav/a.wav"));
  EXPECT_EQ(m.records[0].feature_path, fs::path("/base/f/a.feat"));
  EXPECT_TRUE(m.records[0].embedding_path.empty());
  EXPECT_EQ(m.records[1].audio_path, fs::path("/abs/b.wav"));
  EXPECT_EQ(m.records[1].split, Split::kTest);
  EXPECT_EQ(m.InSplit(Split::kTrain).size(), 1u);
}

TEST(ManifestTest, RejectsMalformedLinesWithLineNumbers) {
  for (const std::string bad : {"utt=a spk=s split=train", "utt=a spk=s split=dev audio=x",
                                "utt=a spk=s split=train audio=x color=red", "utt=a utt=b spk=s split=train audio=x",
                                "utt=a spk=s split=train audio=x stray", "utt= spk=s split=train audio=x"}) {
    try {
      ParseManifest("\n" + bad + "\n", {}, "m.txt");
      ADD_FAILURE() << bad;
    } catch (const Error &e) {
      EXPECT_EQ(e.code(), ErrorCode::kValidation) << bad;
      EXPECT_NE(std::string(e.what()).find("m.txt:2"), std::string::npos) << e.what();
    }
  }
}

TEST(ManifestTest, FormatRoundTripsWithRelativePaths) {
  testing::TempDir dir;
  Manifest m;
  m.records.push_back({"u1", "s1", Split::kAdapt, dir / "wav/u1.wav", dir / "sub/feats/u1.feat", {}});
  const auto path = dir / "sub" / "manifest.txt";
  fs::create_directories(path.parent_path());
  WriteManifest(path, m);
  const auto text = ReadTextFile(path);
  // Paths outside the manifest directory stay relative.
  EXPECT_NE(text.find("audio=../wav/u1.wav"), std::string::npos) << text;
  EXPECT_NE(text.find("features=feats/u1.feat"), std::string::npos) << text;
  const auto back = ReadManifest(path);
  ASSERT_EQ(back.records.size(), 1u);
  EXPECT_EQ(fs::weakly_canonical(back.records[0].audio_path), fs::weakly_canonical(dir / "wav/u1.wav"));
  EXPECT_EQ(back.records[0].split, Split::kAdapt);
}

TEST(ManifestTest, ValidationListsEveryProblem) {
  testing::TempDir dir;
  Touch(dir / "a.wav");
  Manifest m;
  m.records.push_back({"a", "s", Split::kTrain, dir / "a.wav", {}, {}});
  EXPECT_NO_THROW(ValidateManifest(m));
  m.records.push_back({"a", "s", Split::kTrain, dir / "missing.wav", {}, {}});
  try {
    ValidateManifest(m, {.features = true});
    FAIL();
  } catch (const Error &e) {
    const std::string msg = e.what();
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
    EXPECT_NE(msg.find("duplicate utterance id 'a'"), std::string::npos);
    EXPECT_NE(msg.find("missing.wav"), std::string::npos);
    EXPECT_NE(msg.find("no features path"), std::string::npos);
  }
  EXPECT_EQ(CodeOf([] { ValidateManifest(Manifest{}); }), ErrorCode::kValidation);
}

// ---- configuration ---------------------------------------------------------------

TEST(RunConfigTest, FullPresetMatchesPublishedSizes) {
  const auto c = RunConfig::Preset("full");
  EXPECT_EQ(c.wavenet.ReceptiveField(), 4093);
  EXPECT_EQ(c.wavenet.condition_input_dim(), 299);
  EXPECT_EQ(c.wavenet.residual_channels, 100);
  EXPECT_EQ(c.wavenet.gate_channels, 100);
  EXPECT_EQ(c.wavenet.skip_channels, 256);
  EXPECT_EQ(c.wavenet.condition_channels, 80);
  EXPECT_EQ(c.encoder.num_layers, 3);
  EXPECT_EQ(c.encoder.cell_size, 768);
  EXPECT_EQ(c.encoder.proj_size, 256);
  EXPECT_EQ(c.vocoder_train.learning_rate, 1e-4);
  EXPECT_EQ(c.vocoder_train.chunk_samples, 4000);
  EXPECT_THROW(RunConfig::Preset("huge"), Error);
}

TEST(RunConfigTest, OverridesApplyAndUnknownKeysFail) {
  auto c = RunConfig::Toy();
  c.Apply({{"encoder.proj_size", "16"}, {"vocoder_train.learning_rate", "0.5"}, {"generation.sampling", "sample"}});
  EXPECT_EQ(c.wavenet.embedding_dim, 16);
  EXPECT_EQ(c.vocoder_train.learning_rate, 0.5);
  EXPECT_EQ(c.sampling, Sampling::kSample);
  EXPECT_EQ(CodeOf([&] { c.Apply({{"no.such.key", "1"}}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([&] { c.Apply({{"wavenet.blocks", "two"}}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([&] { c.Apply({{"wavenet.blocks", "3x"}}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([&] { c.Apply({{"wavenet.filter_width", "3"}}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([&] { c.Apply({{"generation.sampling", "greedy"}}); }), ErrorCode::kInvalidArgument);
}

TEST(RunConfigTest, TextRoundTripAndHash) {
  const auto a = RunConfig::Toy();
  RunConfig b = RunConfig::Preset("full");
  b.Apply(ParseKeyValueText(a.ToText()));
  EXPECT_EQ(b.ToText(), a.ToText());
  EXPECT_EQ(b.Hash(), a.Hash());
  b.Apply({{"generation.seed", "2"}});
  EXPECT_NE(b.Hash(), a.Hash());
}

TEST(RunConfigTest, LoadLayersPresetFileAndOverrides) {
  testing::TempDir dir;
  WriteFileAtomic(dir / "c.conf", std::string_view("# toy tweaks\nvocoder_train.steps = 7\nmodel.seed = 3\n"));
  const auto c = RunConfig::Load("toy", (dir / "c.conf").string(), {{"model.seed", "9"}});
  EXPECT_EQ(c.vocoder_train.steps, 7);
  EXPECT_EQ(c.model_seed, 9u);
  EXPECT_EQ(c.wavenet.residual_channels, 32);
}

// ---- toy corpus ----------------------------------------------------------------------

TEST(ToyCorpusTest, LayoutAndDeterminism) {
  const auto cfg = SmallCorpus();
  const auto a = MakeToyCorpus(cfg), b = MakeToyCorpus(cfg);
  ASSERT_EQ(a.size(), 12u);
  std::map<std::string, int> splits;
  for (size_t i = 0; i < a.size(); ++i) {
    ++splits[a[i].split];
    EXPECT_EQ(a[i].waveform.samples, b[i].waveform.samples);
    const double secs = static_cast<double>(a[i].waveform.size()) / kCanonicalSampleRate;
    EXPECT_GE(secs, 0.5 - 1e-3);
    EXPECT_LE(secs, 0.6);
    float peak = 0.0f;
    for (float s : a[i].waveform.samples) peak = std::max(peak, std::fabs(s));
    EXPECT_GT(peak, 0.3f);
    EXPECT_LT(peak, 0.6f);
  }
  EXPECT_EQ(splits["train"], 6);
  EXPECT_EQ(splits["adapt"], 3);
  EXPECT_EQ(splits["test"], 3);
  EXPECT_EQ(a.front().utterance_id, "spk00_000");
  auto other = cfg;
  other.seed = 2;
  EXPECT_NE(MakeToyCorpus(other)[0].waveform.samples, a[0].waveform.samples);
}

TEST(ToyCorpusTest, SpeakersDifferInPitch) {
  const auto lo = MakeToySpeaker(0, 8, 1), hi = MakeToySpeaker(7, 8, 1);
  EXPECT_LT(lo.f0_hz, 100.0);
  EXPECT_GT(hi.f0_hz, 240.0);
  std::mt19937_64 rng(1);
  const auto w = SynthesizeToyUtterance(hi, 1.0, kCanonicalSampleRate, rng);
  const auto f0 = EstimateF0(w);
  double sum = 0.0;
  int voiced = 0;
  for (size_t i = 0; i < f0.size(); ++i)
    if (f0.vuv[i]) sum += f0.f0_hz[i], ++voiced;
  ASSERT_GT(voiced, static_cast<int>(f0.size()) / 2);
  EXPECT_NEAR(sum / voiced, hi.f0_hz, 0.15 * hi.f0_hz);
}

// ---- embedding files ------------------------------------------------------------------

TEST(EmbeddingFileTest, RoundTripAndLayout) {
  testing::TempDir dir;
  const EmbeddingRecord rec{"spk01_004", {{0.6f, -0.8f, 0.0f}}};
  WriteEmbedding(dir / "e.emb", rec);
  const auto bytes = ReadFileBytes(dir / "e.emb");
  EXPECT_EQ(bytes.size(), 4u + 4 + 4 + 9 + 4 + 3 * 4);
  EXPECT_EQ(std::string(bytes.data(), 4), "OSAE");
  const auto back = ReadEmbedding(dir / "e.emb");
  EXPECT_EQ(back.utterance_id, rec.utterance_id);
  EXPECT_EQ(back.embedding.values, rec.embedding.values);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(CodeOf([&] { DecodeEmbedding(bad); }), ErrorCode::kMalformedHeader);
  bad = bytes;
  bad.pop_back();
  EXPECT_NE(CodeOf([&] { DecodeEmbedding(bad); }), ErrorCode::kIo);
}

// ---- extraction ---------------------------------------------------------------------------

TEST(ExtractTest, WritesFeaturesStatsAndIsIdempotent) {
  testing::TempDir dir;
  const auto raw = MakeToyCorpusCommand(dir / "corpus", SmallCorpus());
  const auto m = ReadManifest(dir / "corpus" / "manifest.txt");
  ASSERT_EQ(m.records.size(), raw.records.size());
  const auto first = ExtractFeaturesCommand(m, dir / "feats", 1);
  EXPECT_TRUE(first.failures.empty());
  ASSERT_EQ(first.manifest.records.size(), 12u);
  std::map<std::string, std::vector<char>> snapshot;
  for (const auto &e : fs::directory_iterator(dir / "feats")) snapshot[e.path().filename()] = ReadFileBytes(e.path());
  EXPECT_EQ(snapshot.size(), 12u + 2);
  EXPECT_FALSE(fs::exists(dir / "feats" / "failures.txt"));
  // A second run, and one with worker threads, rewrite identical bytes.
  ExtractFeaturesCommand(m, dir / "feats", 1);
  ExtractFeaturesCommand(m, dir / "feats", 3);
  for (const auto &[name, bytes] : snapshot) EXPECT_EQ(ReadFileBytes(dir / "feats" / name), bytes) << name;
  // Stats come from the train split only.
  std::vector<AcousticFeatureSequence> train;
  for (const auto *r : first.manifest.InSplit(Split::kTrain)) train.push_back(ReadFeatures(r->feature_path));
  std::vector<const AcousticFeatureSequence *> ptrs;
  for (const auto &f : train) ptrs.push_back(&f);
  EXPECT_EQ(FeatureStats::Compute(ptrs).ToText(), ReadTextFile(dir / "feats" / "stats.txt"));
}

TEST(ExtractTest, CorruptAudioIsReportedAndSkipped) {
  testing::TempDir dir;
  MakeToyCorpusCommand(dir / "corpus", SmallCorpus());
  auto m = ReadManifest(dir / "corpus" / "manifest.txt");
  WriteFileAtomic(m.records[1].audio_path, std::string_view("RIFF....WAVEjunk"));
  const auto res = ExtractFeaturesCommand(m, dir / "feats", 1);
  ASSERT_EQ(res.failures.size(), 1u);
  EXPECT_EQ(res.failures[0].first, m.records[1].utterance_id);
  EXPECT_EQ(res.manifest.records.size(), 11u);
  EXPECT_NE(ReadTextFile(dir / "feats" / "failures.txt").find(m.records[1].utterance_id), std::string::npos);
}

TEST(WorkerTest, EnvironmentParsing) {
  ::unsetenv(kWorkersEnv);
  EXPECT_EQ(WorkerCount(), 1);
  ::setenv(kWorkersEnv, "4", 1);
  EXPECT_EQ(WorkerCount(), 4);
  ::setenv(kWorkersEnv, "0", 1);
  EXPECT_THROW(WorkerCount(), Error);
  ::setenv(kWorkersEnv, "two", 1);
  EXPECT_THROW(WorkerCount(), Error);
  ::unsetenv(kWorkersEnv);
}

// ---- end to end with tiny models ------------------------------------------------------------

class TinyPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir("osa-pipe");
    MakeToyCorpusCommand(*dir_ / "corpus", SmallCorpus());
    const auto ext = ExtractFeaturesCommand(ReadManifest(*dir_ / "corpus" / "manifest.txt"), *dir_ / "feats", 1);
    stats_ = new FeatureStats(ext.stats);
    TrainEncoderCommand(ext.manifest, ext.stats, TinyRun(), *dir_ / "enc.ckpt");
    embedded_ = new Manifest(EmbedCommand(ext.manifest, *dir_ / "enc.ckpt", *dir_ / "emb", 1));
  }
  static void TearDownTestSuite() {
    delete embedded_;
    delete stats_;
    delete dir_;
  }
  static fs::path Dir() { return dir_->path(); }

  static testing::TempDir *dir_;
  static FeatureStats *stats_;
  static Manifest *embedded_;
};

testing::TempDir *TinyPipeline::dir_ = nullptr;
FeatureStats *TinyPipeline::stats_ = nullptr;
Manifest *TinyPipeline::embedded_ = nullptr;

TEST_F(TinyPipeline, EncoderCheckpointCarriesStatsAndLoss) {
  const auto loaded = LoadEncoder(Dir() / "enc.ckpt");
  EXPECT_EQ(loaded.stats.ToText(), stats_->ToText());
  EXPECT_EQ(loaded.encoder.config().proj_size, 8);
  const auto log = ReadTextFile(Dir() / "enc.ckpt.loss.txt");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 4);
}

TEST_F(TinyPipeline, EmbeddingsAreUnitNormAndListed) {
  ASSERT_EQ(embedded_->records.size(), 12u);
  for (const auto &r : embedded_->records) {
    const auto e = ReadEmbedding(r.embedding_path);
    EXPECT_EQ(e.utterance_id, r.utterance_id);
    ASSERT_EQ(e.embedding.dim(), 8);
    double n = 0.0;
    for (float v : e.embedding.values) n += double(v) * v;
    EXPECT_NEAR(n, 1.0, 1e-5);
  }
  const auto listed = ReadManifest(Dir() / "emb" / "manifest.txt");
  EXPECT_NO_THROW(ValidateManifest(listed, {.features = true, .embeddings = true}));
}

TEST_F(TinyPipeline, EerCommandCountsTrials) {
  const auto res = EerCommand(*embedded_);
  EXPECT_EQ(res.target_trials, 3u);
  EXPECT_EQ(res.nontarget_trials, 6u);
  EXPECT_GE(res.eer, 0.0);
  EXPECT_LE(res.eer, 1.0);
  Manifest no_emb = *embedded_;
  no_emb.records[0].embedding_path.clear();
  EXPECT_EQ(CodeOf([&] { EerCommand(no_emb); }), ErrorCode::kValidation);
}

TEST_F(TinyPipeline, TrainResumeFineTuneAndCopySynthesis) {
  auto cfg = TinyRun();
  const auto osa = Dir() / "osa.ckpt";
  const auto log = TrainVocoderCommand(*embedded_, *stats_, cfg, VocoderMode::kSpeakerAware, osa);
  EXPECT_EQ(log.losses.size(), 4u);
  // Resuming continues the step count from the checkpoint.
  const auto resumed = Dir() / "osa_resumed.ckpt";
  TrainVocoderCommand(*embedded_, *stats_, cfg, VocoderMode::kSpeakerAware, resumed, osa);
  const auto ck = nn::ReadCheckpoint(resumed);
  EXPECT_EQ(ck.step_count, 8);
  // Resuming with the wrong mode is rejected.
  EXPECT_EQ(CodeOf([&] {
              TrainVocoderCommand(*embedded_, *stats_, cfg, VocoderMode::kSpeakerIndependent, Dir() / "x.ckpt", osa);
            }),
            ErrorCode::kIncompatibleCheckpoint);

  const auto ft = FineTuneCommand(*embedded_, osa, cfg, Dir() / "ft.ckpt", "spk01");
  EXPECT_EQ(ft.losses.size(), 3u);
  EXPECT_EQ(CodeOf([&] { FineTuneCommand(*embedded_, osa, cfg, Dir() / "ft2.ckpt", "nobody"); }),
            ErrorCode::kInsufficientData);

  const auto out = CopySynthesisCommand(*embedded_, osa, Dir() / "enc.ckpt", cfg, Dir() / "gen");
  ASSERT_EQ(out.records.size(), 3u);
  for (const auto &r : out.records) {
    const auto feats = ReadFeatures(Dir() / "feats" / (r.utterance_id + ".feat"));
    EXPECT_EQ(ReadWav(r.audio_path).size(), static_cast<size_t>(feats.num_frames() * kFrameShift));
    const auto prov = nlohmann::json::parse(ReadTextFile(Dir() / "gen" / (r.utterance_id + ".json")));
    EXPECT_EQ(prov["mode"], "OSA");
    EXPECT_EQ(prov["embedding_source"], "manifest");
    EXPECT_EQ(prov["config_hash"], Hex64(cfg.Hash()));
    EXPECT_EQ(prov["utterance_seed"].get<uint64_t>(), UtteranceSeed(cfg.generation_seed, r.utterance_id));
  }
  // Without manifest embeddings the encoder supplies them; it gives the
  // same vectors, so the audio is identical.
  Manifest bare = *embedded_;
  for (auto &r : bare.records) r.embedding_path.clear();
  const auto out2 = CopySynthesisCommand(bare, osa, Dir() / "enc.ckpt", cfg, Dir() / "gen2");
  for (size_t i = 0; i < out.records.size(); ++i)
    EXPECT_EQ(ReadFileBytes(out.records[i].audio_path), ReadFileBytes(out2.records[i].audio_path));
  EXPECT_EQ(nlohmann::json::parse(ReadTextFile(Dir() / "gen2" / (out2.records[0].utterance_id + ".json")))
                ["embedding_source"],
            "encoder");
  EXPECT_EQ(CodeOf([&] { CopySynthesisCommand(bare, osa, {}, cfg, Dir() / "gen3"); }), ErrorCode::kIo);

  // Threads do not change the result.
  const auto out3 = CopySynthesisCommand(*embedded_, osa, {}, cfg, Dir() / "gen4", {.workers = 3});
  for (size_t i = 0; i < out.records.size(); ++i)
    EXPECT_EQ(ReadFileBytes(out.records[i].audio_path), ReadFileBytes(out3.records[i].audio_path));

  // Evaluation pairs generated audio with the aligned reference.
  const auto rep = EvaluateCommand(*embedded_, Dir() / "gen");
  ASSERT_EQ(rep.utterances.size(), 3u);
  EXPECT_EQ(rep.duration_correlation.size(), MetricNames().size());
  for (const auto &u : rep.utterances) EXPECT_LT(u.snr_db, 100.0);
}

TEST_F(TinyPipeline, SiVocoderIgnoresEmbeddings) {
  auto cfg = TinyRun();
  const auto si = Dir() / "si.ckpt";
  Manifest no_emb = *embedded_;
  for (auto &r : no_emb.records) r.embedding_path.clear();
  TrainVocoderCommand(no_emb, *stats_, cfg, VocoderMode::kSpeakerIndependent, si);
  const auto out = CopySynthesisCommand(no_emb, si, {}, cfg, Dir() / "gen_si");
  const auto prov = nlohmann::json::parse(ReadTextFile(Dir() / "gen_si" / (out.records[0].utterance_id + ".json")));
  EXPECT_EQ(prov["mode"], "SI");
  EXPECT_EQ(prov["embedding_source"], "none");
}

// ---- evaluation ------------------------------------------------------------------------------------

TEST(EvaluateTest, ReferenceAgainstItself) {
  testing::TempDir dir;
  MakeToyCorpusCommand(dir / "corpus", SmallCorpus());
  const auto m = ReadManifest(dir / "corpus" / "manifest.txt");
  fs::create_directories(dir / "gen");
  for (const auto *r : m.InSplit(Split::kTest)) fs::copy_file(r->audio_path, dir / "gen" / (r->utterance_id + ".wav"));
  const auto rep = EvaluateCommand(m, dir / "gen");
  ASSERT_EQ(rep.utterances.size(), 3u);
  for (const auto &u : rep.utterances) {
    EXPECT_EQ(u.snr_db, 100.0);
    EXPECT_EQ(u.mcd_db, 0.0);
    EXPECT_EQ(u.rmse_las_db, 0.0);
    EXPECT_EQ(u.vuv_error_rate, 0.0);
  }
  EXPECT_EQ(rep.means.at("snr_db"), 100.0);
  const auto no_corr = EvaluateCommand(m, dir / "gen", {.correlation = false});
  EXPECT_TRUE(no_corr.duration_correlation.empty());
  fs::remove(dir / "gen" / (m.InSplit(Split::kTest)[0]->utterance_id + ".wav"));
  EXPECT_EQ(CodeOf([&] { EvaluateCommand(m, dir / "gen"); }), ErrorCode::kValidation);
}

TEST(EvaluateTest, AlignReferenceUsesTheVocoderSpan) {
  Waveform ref;
  for (int i = 0; i < 16000; ++i) ref.samples.push_back(static_cast<float>(i) / 16000.0f);
  // 196 frames generate 15680 samples starting 160 samples in.
  const auto aligned = AlignReference(ref, 15680);
  ASSERT_EQ(aligned.size(), 15680u);
  EXPECT_EQ(aligned.samples[0], ref.samples[160]);
  EXPECT_EQ(AlignReference(ref, 16000 - 80).size(), 16000u);
}

// ---- command line ------------------------------------------------------------------------------------

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const char *cli = std::getenv("OSA_CLI");
    if (!cli) GTEST_SKIP() << "OSA_CLI is not set";
    cli_ = cli;
  }
  int Run(const std::string &args, std::string *out = nullptr) {
    const auto log = dir_ / "out.txt";
    const int rc = std::system((cli_ + " " + args + " > " + log.string() + " 2>&1").c_str());
    if (out) *out = ReadTextFile(log);
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }
  std::string cli_;
  testing::TempDir dir_{"osa-cli"};
};

TEST_F(CliTest, ShowConfigAndErrors) {
  std::string out;
  EXPECT_EQ(Run("show-config --preset toy --set model.seed=5", &out), 0);
  EXPECT_NE(out.find("model.seed = 5"), std::string::npos) << out;
  EXPECT_NE(out.find("wavenet.residual_channels = 32"), std::string::npos) << out;
  EXPECT_EQ(Run("show-config --set bogus.key=1", &out), 1);
  EXPECT_NE(out.find("unknown config key"), std::string::npos) << out;
  EXPECT_NE(Run(""), 0);
  EXPECT_NE(Run("extract-features --out x"), 0);
}

TEST_F(CliTest, CorpusExtractionAndCorruptInput) {
  const auto corpus = dir_.path() / "corpus";
  std::string out;
  ASSERT_EQ(Run("make-toy-corpus --out " + corpus.string() +
                    " --speakers 2 --train 1 --adapt 1 --test 1 --min-seconds 0.4 --max-seconds 0.5",
                &out),
            0)
      << out;
  EXPECT_EQ(ReadManifest(corpus / "manifest.txt").records.size(), 6u);
  EXPECT_EQ(Run("extract-features --manifest " + (corpus / "manifest.txt").string() + " --out " +
                    (dir_.path() / "feats").string(),
                &out),
            0)
      << out;
  EXPECT_TRUE(fs::exists(dir_.path() / "feats" / "stats.txt"));
  WriteFileAtomic(corpus / "wav" / "spk00_000.wav", std::string_view("not a wav"));
  EXPECT_EQ(Run("extract-features --manifest " + (corpus / "manifest.txt").string() + " --out " +
                    (dir_.path() / "feats2").string(),
                &out),
            2);
  EXPECT_NE(out.find("spk00_000"), std::string::npos) << out;
  EXPECT_EQ(Run("eer --manifest " + (corpus / "manifest.txt").string(), &out), 1);
  EXPECT_NE(out.find("no embedding path"), std::string::npos) << out;
}

}  // namespace
}  // namespace osa::pipeline
