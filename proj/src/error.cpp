// SPDX-License-Identifier: Apache-2.0
#include "error.hpp"

namespace aepo {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kIo: return "io error";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kAlignment: return "alignment error";
    case ErrorCode::kCapExceeded: return "enumeration cap exceeded";
    case ErrorCode::kTransport: return "transport error";
    case ErrorCode::kValidation: return "validation error";
    case ErrorCode::kState: return "invalid state";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kNotFound: return "not found";
    case ErrorCode::kInvariant: return "invariant violation";
  }
  return "unknown error";
}

}  // namespace aepo
