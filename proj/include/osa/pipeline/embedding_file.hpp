// osa/pipeline/embedding_file.hpp

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

// Per-utterance embedding file, little-endian:
//   char[4] "OSAE" | u32 version (1) | u32 id length | id bytes |
//   u32 dim | f32[dim]

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "osa/error.hpp"
#include "osa/fileio.hpp"
#include "osa/speaker_encoder.hpp"

namespace osa::pipeline {

inline constexpr uint32_t kEmbeddingFileVersion = 1;

struct EmbeddingRecord {
  std::string utterance_id;
  SpeakerEmbedding embedding;
};

inline std::vector<char> EncodeEmbedding(const EmbeddingRecord &r) {
  ByteWriter w;
  w.PutBytes("OSAE");
  w.Put<uint32_t>(kEmbeddingFileVersion);
  w.PutString(r.utterance_id);
  w.Put<uint32_t>(static_cast<uint32_t>(r.embedding.dim()));
  for (float v : r.embedding.values) w.Put<float>(v);
  return w.bytes();
}

inline EmbeddingRecord DecodeEmbedding(const std::vector<char> &bytes, const std::string &name = "embedding") {
  ByteReader r(bytes.data(), bytes.size(), name);
  Require(r.GetBytes(4) == "OSAE", ErrorCode::kMalformedHeader, name + ": bad magic");
  const auto version = r.Get<uint32_t>();
  Require(version == kEmbeddingFileVersion, ErrorCode::kMalformedHeader,
          name + ": unsupported version " + std::to_string(version));
  EmbeddingRecord rec;
  rec.utterance_id = r.GetString();
  const auto dim = r.Get<uint32_t>();
  Require(r.remaining() == static_cast<size_t>(dim) * sizeof(float), ErrorCode::kMalformedHeader,
          name + ": payload size does not match dim " + std::to_string(dim));
  rec.embedding.values.resize(dim);
  for (auto &v : rec.embedding.values) v = r.Get<float>();
  return rec;
}

inline void WriteEmbedding(const std::filesystem::path &path, const EmbeddingRecord &r) {
  WriteFileAtomic(path, EncodeEmbedding(r));
}

inline EmbeddingRecord ReadEmbedding(const std::filesystem::path &path) {
  return DecodeEmbedding(ReadFileBytes(path), path.string());
}

}  // namespace osa::pipeline
