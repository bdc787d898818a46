// osa/pipeline/manifest.hpp

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

// Corpus manifests. One record per line, whitespace-separated key=value
// fields:
//
//   utt=spk00_000 spk=spk00 split=train audio=wav/spk00_000.wav
//       [features=feats/spk00_000.feat] [embedding=emb/spk00_000.emb]
//
// Blank lines and lines starting with '#' are ignored. Relative paths are
// resolved against the manifest's directory.

#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "osa/error.hpp"
#include "osa/fileio.hpp"

namespace osa::pipeline {

enum class Split { kTrain, kAdapt, kTest };

inline std::string SplitName(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kAdapt: return "adapt";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split ParseSplit(const std::string &s) {
  if (s == "train") return Split::kTrain;
  if (s == "adapt") return Split::kAdapt;
  if (s == "test") return Split::kTest;
  Fail(ErrorCode::kValidation, "unknown split '" + s + "' (expected train, adapt or test)");
}

struct ManifestRecord {
  std::string utterance_id;
  std::string speaker_id;
  Split split = Split::kTrain;
  std::filesystem::path audio_path;
  std::filesystem::path feature_path;    // empty when absent
  std::filesystem::path embedding_path;  // empty when absent
};

struct Manifest {
  std::vector<ManifestRecord> records;

  std::vector<const ManifestRecord *> InSplit(Split s) const {
    std::vector<const ManifestRecord *> out;
    for (const auto &r : records)
      if (r.split == s) out.push_back(&r);
    return out;
  }
};

inline std::filesystem::path Resolve(const std::filesystem::path &base, const std::string &p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

/// Parses manifest text; `base` resolves relative paths.
inline Manifest ParseManifest(const std::string &text, const std::filesystem::path &base = {},
                              const std::string &name = "manifest") {
  Manifest m;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto where = name + ":" + std::to_string(lineno) + ": ";
    std::istringstream ls(line);
    std::string tok;
    std::map<std::string, std::string> fields;
    while (ls >> tok) {
      if (fields.empty() && tok[0] == '#') break;
      const auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0)
        Fail(ErrorCode::kValidation, where + "expected key=value, got '" + tok + "'");
      const auto key = tok.substr(0, eq);
      if (!fields.emplace(key, tok.substr(eq + 1)).second)
        Fail(ErrorCode::kValidation, where + "duplicate field '" + key + "'");
    }
    if (fields.empty()) continue;
    static const std::set<std::string> kKnown{"utt", "spk", "split", "audio", "features", "embedding"};
    for (const auto &[k, v] : fields) {
      if (!kKnown.count(k)) Fail(ErrorCode::kValidation, where + "unknown field '" + k + "'");
      if (v.empty()) Fail(ErrorCode::kValidation, where + "empty value for '" + k + "'");
    }
    for (const char *req : {"utt", "spk", "split", "audio"})
      if (!fields.count(req)) Fail(ErrorCode::kValidation, where + "missing field '" + std::string(req) + "'");
    ManifestRecord r;
    r.utterance_id = fields["utt"];
    r.speaker_id = fields["spk"];
    const auto &split = fields["split"];
    if (split != "train" && split != "adapt" && split != "test")
      Fail(ErrorCode::kValidation, where + "unknown split '" + split + "' (expected train, adapt or test)");
    r.split = ParseSplit(split);
    r.audio_path = Resolve(base, fields["audio"]);
    if (fields.count("features")) r.feature_path = Resolve(base, fields["features"]);
    if (fields.count("embedding")) r.embedding_path = Resolve(base, fields["embedding"]);
    m.records.push_back(std::move(r));
  }
  return m;
}

inline Manifest ReadManifest(const std::filesystem::path &path) {
  return ParseManifest(ReadTextFile(path), path.parent_path(), path.string());
}

/// Serializes with paths made relative to `base` when they lie beneath it.
inline std::string FormatManifest(const Manifest &m, const std::filesystem::path &base = {}) {
  const auto rel = [&](const std::filesystem::path &p) {
    if (base.empty()) return p.generic_string();
    const auto r = p.lexically_relative(base);
    if (r.empty()) return p.generic_string();
    return r.generic_string();
  };
  std::string out;
  for (const auto &r : m.records) {
    out += "utt=" + r.utterance_id + " spk=" + r.speaker_id + " split=" + SplitName(r.split) +
           " audio=" + rel(r.audio_path);
    if (!r.feature_path.empty()) out += " features=" + rel(r.feature_path);
    if (!r.embedding_path.empty()) out += " embedding=" + rel(r.embedding_path);
    out += '\n';
  }
  return out;
}

inline void WriteManifest(const std::filesystem::path &path, const Manifest &m) {
  WriteFileAtomic(path, FormatManifest(m, path.parent_path()));
}

struct ManifestRequirements {
  bool features = false;
  bool embeddings = false;
};

/// Checks unique ids, non-empty content and that every referenced path
/// exists. Throws kValidation listing every problem found.
inline void ValidateManifest(const Manifest &m, const ManifestRequirements &req = {}) {
  std::vector<std::string> problems;
  std::set<std::string> seen;
  if (m.records.empty()) problems.push_back("manifest has no records");
  const auto check = [&](const ManifestRecord &r, const std::filesystem::path &p, const char *what) {
    if (p.empty())
      problems.push_back(r.utterance_id + ": no " + what + " path");
    else if (!std::filesystem::exists(p))
      problems.push_back(r.utterance_id + ": " + what + " '" + p.string() + "' does not exist");
  };
  for (const auto &r : m.records) {
    if (!seen.insert(r.utterance_id).second) problems.push_back("duplicate utterance id '" + r.utterance_id + "'");
    if (r.utterance_id.find('/') != std::string::npos)
      problems.push_back(r.utterance_id + ": utterance id must not contain '/'");
    check(r, r.audio_path, "audio");
    if (req.features || !r.feature_path.empty()) check(r, r.feature_path, "features");
    if (req.embeddings || !r.embedding_path.empty()) check(r, r.embedding_path, "embedding");
  }
  if (problems.empty()) return;
  std::string msg = "manifest validation failed:";
  for (const auto &p : problems) msg += "\n  " + p;
  Fail(ErrorCode::kValidation, msg);
}

}  // namespace osa::pipeline
