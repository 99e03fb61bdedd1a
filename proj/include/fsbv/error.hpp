// Copyright 2026 The fsbv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace fsbv {

enum class ErrorKind {
  kInvalidArgument,
  kShapeMismatch,
  kNonFinite,
  kInsufficientData,
  kNotConverged,
  kIo,
  kDecode,
  kBadMagic,
  kUnsupportedVersion,
  kChecksum,
  kNotFound,
};

inline const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kShapeMismatch: return "shape_mismatch";
    case ErrorKind::kNonFinite: return "non_finite";
    case ErrorKind::kInsufficientData: return "insufficient_data";
    case ErrorKind::kNotConverged: return "not_converged";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kDecode: return "decode";
    case ErrorKind::kBadMagic: return "bad_magic";
    case ErrorKind::kUnsupportedVersion: return "unsupported_version";
    case ErrorKind::kChecksum: return "checksum";
    case ErrorKind::kNotFound: return "not_found";
  }
  return "unknown";
}

/// All library failures are reported through this exception; `kind()` lets
/// callers (and the CLI error line) distinguish the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace fsbv
