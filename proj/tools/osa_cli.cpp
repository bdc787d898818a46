// tools/osa_cli.cpp

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

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "osa/pipeline/commands.hpp"
#include "osa/runtime.hpp"

namespace fs = std::filesystem;
using namespace osa;
using namespace osa::pipeline;

namespace {

struct ConfigFlags {
  std::string preset = "full";
  std::string file;
  std::vector<std::string> overrides;

  void Attach(CLI::App *cmd) {
    cmd->add_option("--preset", preset, "Base configuration: full or toy")->capture_default_str();
    cmd->add_option("--config", file, "Flat key = value configuration file applied over the preset");
    cmd->add_option("--set", overrides, "Override one setting, key=value (repeatable)");
  }

  RunConfig Resolve() const {
    StringMap kv;
    for (const auto &o : overrides) {
      const auto eq = o.find('=');
      Require(eq != std::string::npos && eq > 0, ErrorCode::kInvalidArgument, "--set expects key=value, got " + o);
      kv[Trim(o.substr(0, eq))] = Trim(o.substr(eq + 1));
    }
    return RunConfig::Load(preset, file, kv);
  }
};

FeatureStats LoadStats(const std::string &stats_path, const fs::path &manifest_path) {
  const fs::path p = stats_path.empty() ? manifest_path.parent_path() / "stats.txt" : fs::path(stats_path);
  Require(fs::exists(p), ErrorCode::kIo, "normalization stats '" + p.string() + "' not found (use --stats)");
  return FeatureStats::FromText(ReadTextFile(p));
}

}  // namespace

int main(int argc, char **argv) {
  osa::ConfigureAllocator();
  CLI::App app{"Speaker-aware WaveNet vocoder with online adaptation"};
  app.require_subcommand(1);
  app.footer("Worker threads for per-utterance stages come from " + std::string(kWorkersEnv) + " (default 1).");

  // make-toy-corpus
  ToyCorpusConfig toy;
  std::string toy_out;
  auto *c_toy = app.add_subcommand("make-toy-corpus", "Write a synthetic multi-speaker corpus and its manifest");
  c_toy->add_option("--out", toy_out, "Output directory")->required();
  c_toy->add_option("--speakers", toy.num_speakers, "Number of speakers")->capture_default_str();
  c_toy->add_option("--train", toy.train_per_speaker, "Train utterances per speaker")->capture_default_str();
  c_toy->add_option("--adapt", toy.adapt_per_speaker, "Adapt utterances per speaker")->capture_default_str();
  c_toy->add_option("--test", toy.test_per_speaker, "Test utterances per speaker")->capture_default_str();
  c_toy->add_option("--min-seconds", toy.min_seconds, "Shortest utterance")->capture_default_str();
  c_toy->add_option("--max-seconds", toy.max_seconds, "Longest utterance")->capture_default_str();
  c_toy->add_option("--seed", toy.seed, "Generator seed")->capture_default_str();

  // extract-features
  std::string manifest, out, stats, checkpoint, encoder, resume, generated, split = "test", speaker, mode;
  auto *c_ext = app.add_subcommand("extract-features", "Acoustic features, normalization stats, updated manifest");
  c_ext->add_option("--manifest", manifest, "Input manifest")->required();
  c_ext->add_option("--out", out, "Output directory")->required();

  // train-encoder
  ConfigFlags enc_cfg;
  auto *c_tenc = app.add_subcommand("train-encoder", "Train the GE2E speaker encoder on the train split");
  c_tenc->add_option("--manifest", manifest, "Manifest with feature paths")->required();
  c_tenc->add_option("--stats", stats, "Normalization stats (default: stats.txt beside the manifest)");
  c_tenc->add_option("--out", out, "Output checkpoint")->required();
  enc_cfg.Attach(c_tenc);

  // embed
  auto *c_emb = app.add_subcommand("embed", "One embedding file per utterance");
  c_emb->add_option("--manifest", manifest, "Manifest with feature paths")->required();
  c_emb->add_option("--encoder", encoder, "Encoder checkpoint")->required();
  c_emb->add_option("--out", out, "Output directory")->required();

  // train-vocoder
  ConfigFlags voc_cfg;
  auto *c_tvoc = app.add_subcommand("train-vocoder", "Train an SI or OSA WaveNet vocoder on the train split");
  c_tvoc->add_option("--manifest", manifest, "Manifest with feature (and, for OSA, embedding) paths")->required();
  c_tvoc->add_option("--mode", mode, "SI or OSA")->required();
  c_tvoc->add_option("--stats", stats, "Normalization stats (default: stats.txt beside the manifest)");
  c_tvoc->add_option("--out", out, "Output checkpoint")->required();
  c_tvoc->add_option("--resume", resume, "Continue from this checkpoint");
  voc_cfg.Attach(c_tvoc);

  // fine-tune
  ConfigFlags ft_cfg;
  auto *c_ft = app.add_subcommand("fine-tune", "Fine-tune a vocoder on the adapt split");
  c_ft->add_option("--manifest", manifest, "Manifest with feature paths")->required();
  c_ft->add_option("--base", checkpoint, "Checkpoint to start from")->required();
  c_ft->add_option("--out", out, "Output checkpoint")->required();
  c_ft->add_option("--speaker", speaker, "Restrict adaptation data to one speaker");
  ft_cfg.Attach(c_ft);

  // copy-synthesis
  ConfigFlags cs_cfg;
  auto *c_cs = app.add_subcommand("copy-synthesis", "Analysis, embedding and generation for one split");
  c_cs->add_option("--manifest", manifest, "Manifest")->required();
  c_cs->add_option("--vocoder", checkpoint, "Vocoder checkpoint")->required();
  c_cs->add_option("--encoder", encoder, "Encoder checkpoint (OSA without manifest embeddings)");
  c_cs->add_option("--out", out, "Output directory")->required();
  c_cs->add_option("--split", split, "Split to synthesize")->capture_default_str();
  cs_cfg.Attach(c_cs);

  // evaluate
  bool no_corr = false, mcd_c0 = false;
  auto *c_ev = app.add_subcommand("evaluate", "Objective metrics of generated audio against references");
  c_ev->add_option("--manifest", manifest, "Reference manifest")->required();
  c_ev->add_option("--generated", generated, "Directory holding <utt>.wav")->required();
  c_ev->add_option("--out", out, "Report CSV path");
  c_ev->add_option("--split", split, "Split to evaluate")->capture_default_str();
  c_ev->add_flag("--no-correlation", no_corr, "Skip the duration correlation table");
  c_ev->add_flag("--mcd-include-c0", mcd_c0, "Include c0 in the cepstral distortion");

  // eer
  auto *c_eer = app.add_subcommand("eer", "Speaker-verification EER: adapt split enrolls, test split is scored");
  c_eer->add_option("--manifest", manifest, "Manifest with embedding paths")->required();

  // show-config
  ConfigFlags show_cfg;
  auto *c_show = app.add_subcommand("show-config", "Print the resolved configuration");
  show_cfg.Attach(c_show);

  CLI11_PARSE(app, argc, argv);

  try {
    const int workers = WorkerCount();
    if (c_toy->parsed()) {
      const auto m = MakeToyCorpusCommand(toy_out, toy);
      std::cout << "wrote " << m.records.size() << " utterances to " << toy_out << "\n";
    } else if (c_ext->parsed()) {
      const auto res = ExtractFeaturesCommand(ReadManifest(manifest), out, workers);
      std::cout << "extracted " << res.manifest.records.size() << " feature files, " << res.failures.size()
                << " failures\n";
      for (const auto &[id, err] : res.failures) std::cerr << "failed: " << id << ": " << err << "\n";
      if (!res.failures.empty()) return 2;
    } else if (c_tenc->parsed()) {
      const auto cfg = enc_cfg.Resolve();
      const auto log = TrainEncoderCommand(ReadManifest(manifest), LoadStats(stats, manifest), cfg, out);
      std::cout << "trained encoder for " << log.losses.size() << " steps, final loss "
                << (log.losses.empty() ? 0.0 : log.losses.back()) << "\n";
    } else if (c_emb->parsed()) {
      const auto m = EmbedCommand(ReadManifest(manifest), encoder, out, workers);
      std::cout << "wrote " << m.records.size() << " embeddings\n";
    } else if (c_tvoc->parsed()) {
      const auto cfg = voc_cfg.Resolve();
      const auto log =
          TrainVocoderCommand(ReadManifest(manifest), LoadStats(stats, manifest), cfg, ParseMode(mode), out, resume);
      std::cout << "trained " << mode << " vocoder for " << log.losses.size() << " steps, final loss "
                << (log.losses.empty() ? 0.0 : log.losses.back()) << "\n";
    } else if (c_ft->parsed()) {
      const auto cfg = ft_cfg.Resolve();
      const auto log = FineTuneCommand(ReadManifest(manifest), checkpoint, cfg, out, speaker);
      std::cout << "fine-tuned for " << log.losses.size() << " steps\n";
    } else if (c_cs->parsed()) {
      const auto cfg = cs_cfg.Resolve();
      const auto m = CopySynthesisCommand(ReadManifest(manifest), checkpoint, encoder, cfg, out,
                                          {.split = ParseSplit(split), .workers = workers});
      std::cout << "generated " << m.records.size() << " waveforms in " << out << "\n";
    } else if (c_ev->parsed()) {
      const auto rep = EvaluateCommand(
          ReadManifest(manifest), generated,
          {.split = ParseSplit(split), .correlation = !no_corr, .mcd_include_c0 = mcd_c0, .workers = workers});
      if (!out.empty()) WriteFileAtomic(out, rep.ToCsv());
      std::cout << rep.ToTable();
    } else if (c_eer->parsed()) {
      const auto res = EerCommand(ReadManifest(manifest));
      std::printf("EER %.4f%% (%zu target, %zu non-target trials; mean scores %.4f / %.4f)\n", 100.0 * res.eer,
                  res.target_trials, res.nontarget_trials, res.mean_target_score, res.mean_nontarget_score);
    } else if (c_show->parsed()) {
      std::cout << show_cfg.Resolve().ToText();
    }
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
