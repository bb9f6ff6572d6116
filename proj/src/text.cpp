// SPDX-License-Identifier: Apache-2.0
#include "text.hpp"

namespace aepo {
namespace {

// Returns the byte length of the whitespace sequence starting at text[pos],
// or 0 if the code point there is not White_Space.
size_t whitespace_length(std::string_view text, size_t pos) {
  const auto byte = [&](size_t i) -> unsigned char {
    return i < text.size() ? static_cast<unsigned char>(text[i]) : 0;
  };
  const unsigned char b0 = byte(pos);
  if (b0 == ' ' || (b0 >= 0x09 && b0 <= 0x0D)) return 1;
  if (b0 == 0xC2) {
    const unsigned char b1 = byte(pos + 1);
    if (b1 == 0x85 || b1 == 0xA0) return 2;  // NEL, NBSP
    return 0;
  }
  if (b0 == 0xE1) {
    if (byte(pos + 1) == 0x9A && byte(pos + 2) == 0x80) return 3;  // U+1680
    return 0;
  }
  if (b0 == 0xE2) {
    const unsigned char b1 = byte(pos + 1);
    const unsigned char b2 = byte(pos + 2);
    if (b1 == 0x80) {
      if (b2 >= 0x80 && b2 <= 0x8A) return 3;  // U+2000..U+200A
      if (b2 == 0xA8 || b2 == 0xA9 || b2 == 0xAF) return 3;  // U+2028/9, U+202F
    }
    if (b1 == 0x81 && b2 == 0x9F) return 3;  // U+205F
    return 0;
  }
  if (b0 == 0xE3) {
    if (byte(pos + 1) == 0x80 && byte(pos + 2) == 0x80) return 3;  // U+3000
  }
  return 0;
}

}  // namespace

std::vector<std::string_view> tokenize(std::string_view text) {
  std::vector<std::string_view> tokens;
  size_t pos = 0;
  size_t start = std::string_view::npos;
  while (pos < text.size()) {
    const size_t ws = whitespace_length(text, pos);
    if (ws > 0) {
      if (start != std::string_view::npos) {
        tokens.push_back(text.substr(start, pos - start));
        start = std::string_view::npos;
      }
      pos += ws;
    } else {
      if (start == std::string_view::npos) start = pos;
      ++pos;
    }
  }
  if (start != std::string_view::npos) tokens.push_back(text.substr(start));
  return tokens;
}

}  // namespace aepo
