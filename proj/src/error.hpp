// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace aepo {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kParse,
  kAlignment,
  kCapExceeded,
  kTransport,
  kValidation,
  kState,
  kConflict,
  kNotFound,
  kInvariant,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries a code so the C layer can map
// it onto a status value without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace aepo
