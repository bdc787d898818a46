// osa/nn/checkpoint.hpp

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

// Checkpoint container, little-endian:
//
//   char[8]  "OSACKPT\0"
//   u32      version (1)
//   u32      meta_count, then meta_count x {string key, string value}
//   u32      param_count, then per parameter:
//              string name, u32 rank, i64 dims[rank], f32 data[prod(dims)]
//   i64      optimizer step_count
//   u8       has_moments; when 1, per parameter in the same order:
//              f32 m[prod(dims)], f32 v[prod(dims)]
//
// Strings are u32 length followed by raw bytes.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "osa/error.hpp"
#include "osa/fileio.hpp"
#include "osa/nn/parameters.hpp"

namespace osa::nn {

inline constexpr uint32_t kCheckpointVersion = 1;

using Metadata = std::map<std::string, std::string>;

/// Raw checkpoint contents, independent of any model.
struct Checkpoint {
  struct Entry {
    std::string name;
    Shape shape;
    std::vector<float> data, m, v;
  };
  Metadata meta;
  std::vector<Entry> params;
  int64_t step_count = 0;
  bool has_moments = false;
};

template <typename S>
Checkpoint CaptureCheckpoint(const ParameterStore<S> &store, Metadata meta, bool with_moments = true) {
  Checkpoint ck;
  ck.meta = std::move(meta);
  ck.step_count = store.step_count();
  ck.has_moments = with_moments;
  for (const auto &slot : store.slots()) {
    Checkpoint::Entry e;
    e.name = slot.name;
    e.shape = slot.param.shape();
    const auto copy = [](const RowMatrix<S> &m) {
      std::vector<float> out(m.size());
      for (Index i = 0; i < m.size(); ++i) out[i] = static_cast<float>(m.data()[i]);
      return out;
    };
    e.data = copy(slot.param.value());
    if (with_moments) {
      e.m = copy(slot.m);
      e.v = copy(slot.v);
    }
    ck.params.push_back(std::move(e));
  }
  return ck;
}

/// Copies checkpoint tensors into an existing store. Names, order and shapes
/// must match exactly.
template <typename S>
void RestoreCheckpoint(const Checkpoint &ck, ParameterStore<S> &store, bool restore_optimizer = true) {
  Require(ck.params.size() == store.size(), ErrorCode::kIncompatibleCheckpoint,
          "checkpoint has " + std::to_string(ck.params.size()) + " parameters, model expects " +
              std::to_string(store.size()));
  for (size_t i = 0; i < ck.params.size(); ++i) {
    const auto &e = ck.params[i];
    auto &slot = store.slots()[i];
    Require(e.name == slot.name, ErrorCode::kIncompatibleCheckpoint,
            "parameter " + std::to_string(i) + " is '" + e.name + "', model expects '" + slot.name + "'");
    Require(e.shape == slot.param.shape(), ErrorCode::kIncompatibleCheckpoint,
            "shape mismatch for '" + e.name + "': checkpoint " + ShapeString(e.shape) + " vs model " +
                ShapeString(slot.param.shape()));
  }
  for (size_t i = 0; i < ck.params.size(); ++i) {
    const auto &e = ck.params[i];
    auto &slot = store.slots()[i];
    auto &w = slot.param.mutable_value();
    for (Index j = 0; j < w.size(); ++j) w.data()[j] = static_cast<S>(e.data[j]);
    if (restore_optimizer && ck.has_moments) {
      for (Index j = 0; j < w.size(); ++j) {
        slot.m.data()[j] = static_cast<S>(e.m[j]);
        slot.v.data()[j] = static_cast<S>(e.v[j]);
      }
    } else {
      slot.m.setZero();
      slot.v.setZero();
    }
  }
  store.set_step_count(restore_optimizer ? ck.step_count : 0);
}

inline std::vector<char> EncodeCheckpoint(const Checkpoint &ck) {
  ByteWriter out;
  out.PutBytes(std::string_view("OSACKPT\0", 8));
  out.Put<uint32_t>(kCheckpointVersion);
  out.Put<uint32_t>(static_cast<uint32_t>(ck.meta.size()));
  for (const auto &[k, v] : ck.meta) {
    out.PutString(k);
    out.PutString(v);
  }
  out.Put<uint32_t>(static_cast<uint32_t>(ck.params.size()));
  for (const auto &e : ck.params) {
    out.PutString(e.name);
    out.Put<uint32_t>(static_cast<uint32_t>(e.shape.size()));
    for (Index d : e.shape) out.Put<int64_t>(d);
    for (float f : e.data) out.Put<float>(f);
  }
  out.Put<int64_t>(ck.step_count);
  out.Put<uint8_t>(ck.has_moments ? 1 : 0);
  if (ck.has_moments) {
    for (const auto &e : ck.params) {
      for (float f : e.m) out.Put<float>(f);
      for (float f : e.v) out.Put<float>(f);
    }
  }
  return out.bytes();
}

inline Checkpoint DecodeCheckpoint(const std::vector<char> &bytes, const std::string &name = "checkpoint") {
  ByteReader r(bytes.data(), bytes.size(), name);
  if (r.GetBytes(8) != std::string("OSACKPT\0", 8)) Fail(ErrorCode::kMalformedHeader, name + ": bad magic");
  if (r.Get<uint32_t>() != kCheckpointVersion) Fail(ErrorCode::kMalformedHeader, name + ": unsupported version");
  Checkpoint ck;
  const uint32_t n_meta = r.Get<uint32_t>();
  for (uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.GetString();
    ck.meta[k] = r.GetString();
  }
  const uint32_t n_params = r.Get<uint32_t>();
  for (uint32_t i = 0; i < n_params; ++i) {
    Checkpoint::Entry e;
    e.name = r.GetString();
    const uint32_t rank = r.Get<uint32_t>();
    if (rank > 8) Fail(ErrorCode::kMalformedHeader, name + ": implausible rank");
    Index count = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      e.shape.push_back(static_cast<Index>(r.Get<int64_t>()));
      count *= e.shape.back();
    }
    if (count < 0 || static_cast<size_t>(count) * 4 > r.remaining())
      Fail(ErrorCode::kMalformedHeader, name + ": parameter data overruns file");
    e.data.resize(count);
    for (auto &f : e.data) f = r.Get<float>();
    ck.params.push_back(std::move(e));
  }
  ck.step_count = r.Get<int64_t>();
  ck.has_moments = r.Get<uint8_t>() != 0;
  if (ck.has_moments) {
    for (auto &e : ck.params) {
      e.m.resize(e.data.size());
      e.v.resize(e.data.size());
      for (auto &f : e.m) f = r.Get<float>();
      for (auto &f : e.v) f = r.Get<float>();
    }
  }
  return ck;
}

inline void WriteCheckpoint(const std::filesystem::path &path, const Checkpoint &ck) {
  WriteFileAtomic(path, EncodeCheckpoint(ck));
}

inline Checkpoint ReadCheckpoint(const std::filesystem::path &path) {
  return DecodeCheckpoint(ReadFileBytes(path), path.string());
}

}  // namespace osa::nn
