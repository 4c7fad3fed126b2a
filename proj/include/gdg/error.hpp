// SPDX-License-Identifier: Apache-2.0
//
// Error type shared by all modules. Every failure carries a category so the
// command line tool can map it to a stable exit code.

#pragma once

#include <stdexcept>
#include <string>

namespace gdg {

enum class ErrorCode {
  kConfig = 2,      // bad or inconsistent configuration
  kIo = 3,          // file not found, unreadable, malformed container
  kValidation = 4,  // schema or precondition violation in data
  kCapacity = 5,    // request exceeds what the data can provide
  kDivergence = 6,  // non-finite loss or gradient during training
  kInternal = 7,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kCapacity: return "capacity";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }
  int exit_code() const { return static_cast<int>(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace gdg
