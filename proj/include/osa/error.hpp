// osa/error.hpp

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

#include <stdexcept>
#include <string>

namespace osa {

/// Every failure raised by the library carries one of these codes so callers
/// (and tests) can tell error kinds apart without parsing messages.
enum class ErrorCode {
  kIo,
  kMalformedHeader,
  kUnsupportedEncoding,
  kTooShort,
  kShapeMismatch,
  kOutOfRange,
  kInsufficientData,
  kAlignment,
  kLengthMismatch,
  kDegenerate,
  kInvalidArgument,
  kIncompatibleCheckpoint,
  kValidation,
};

inline const char *ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "io";
    case ErrorCode::kMalformedHeader: return "malformed-header";
    case ErrorCode::kUnsupportedEncoding: return "unsupported-encoding";
    case ErrorCode::kTooShort: return "too-short";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kOutOfRange: return "out-of-range";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kAlignment: return "alignment";
    case ErrorCode::kLengthMismatch: return "length-mismatch";
    case ErrorCode::kDegenerate: return "degenerate";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kIncompatibleCheckpoint: return "incompatible-checkpoint";
    case ErrorCode::kValidation: return "validation";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + what),
        code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string &what) {
  throw Error(code, what);
}

inline void Require(bool cond, ErrorCode code, const std::string &what) {
  if (!cond) Fail(code, what);
}

}  // namespace osa
