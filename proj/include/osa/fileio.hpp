// osa/fileio.hpp

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

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "osa/error.hpp"

namespace osa {

/// Little-endian byte buffer used by every binary container in the project.
class ByteWriter {
 public:
  template <typename T>
  void Put(T value) {
    static_assert(std::is_arithmetic_v<T>);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
    }
    bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
  }
  void PutBytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void PutString(std::string_view s) {
    Put<uint32_t>(static_cast<uint32_t>(s.size()));
    PutBytes(s);
  }
  const std::vector<char> &bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  ByteReader(const char *data, size_t size, std::string context)
      : data_(data), size_(size), context_(std::move(context)) {}

  template <typename T>
  T Get() {
    static_assert(std::is_arithmetic_v<T>);
    Need(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, data_ + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
    }
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }
  std::string GetBytes(size_t n) {
    Need(n);
    std::string s(data_ + pos_, n);
    pos_ += n;
    return s;
  }
  std::string GetString() { return GetBytes(Get<uint32_t>()); }
  void Skip(size_t n) {
    Need(n);
    pos_ += n;
  }
  size_t remaining() const { return size_ - pos_; }
  size_t position() const { return pos_; }

 private:
  void Need(size_t n) const {
    if (size_ - pos_ < n) Fail(ErrorCode::kMalformedHeader, context_ + ": truncated data");
  }
  const char *data_;
  size_t size_;
  size_t pos_ = 0;
  std::string context_;
};

inline std::vector<char> ReadFileBytes(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) Fail(ErrorCode::kIo, "read failure on " + path.string());
  return data;
}

/// Writes to a sibling temp file and renames it over the target, so readers
/// never observe a partially written file.
inline void WriteFileAtomic(const std::filesystem::path &path, const char *data, size_t size) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) Fail(ErrorCode::kIo, "cannot open " + tmp.string() + " for writing");
    out.write(data, static_cast<std::streamsize>(size));
    out.flush();
    if (!out) Fail(ErrorCode::kIo, "write failure on " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) Fail(ErrorCode::kIo, "rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

inline void WriteFileAtomic(const std::filesystem::path &path, const std::vector<char> &bytes) {
  WriteFileAtomic(path, bytes.data(), bytes.size());
}

inline void WriteFileAtomic(const std::filesystem::path &path, std::string_view text) {
  WriteFileAtomic(path, text.data(), text.size());
}

inline std::string ReadTextFile(const std::filesystem::path &path) {
  auto bytes = ReadFileBytes(path);
  return std::string(bytes.begin(), bytes.end());
}

/// 64-bit FNV-1a; used for provenance hashes that must be stable across builds.
inline uint64_t Fnv1a64(std::string_view data) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace osa
