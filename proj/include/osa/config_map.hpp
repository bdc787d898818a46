// osa/config_map.hpp

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

#include <map>
#include <sstream>
#include <string>

#include "osa/error.hpp"

namespace osa {

using StringMap = std::map<std::string, std::string>;

inline const std::string &MetaValue(const StringMap &meta, const std::string &key) {
  auto it = meta.find(key);
  if (it == meta.end()) Fail(ErrorCode::kIncompatibleCheckpoint, "missing metadata key '" + key + "'");
  return it->second;
}

inline std::string Trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Flat `key = value` text; `#` starts a comment.
inline StringMap ParseKeyValueText(const std::string &text, const std::string &name = "config") {
  StringMap out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      Fail(ErrorCode::kMalformedHeader, name + ":" + std::to_string(lineno) + ": expected key = value");
    out[Trim(line.substr(0, eq))] = Trim(line.substr(eq + 1));
  }
  return out;
}

inline std::string FormatKeyValueText(const StringMap &kv) {
  std::string out;
  for (const auto &[k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

}  // namespace osa
