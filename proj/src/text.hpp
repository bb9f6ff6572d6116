// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace aepo {

// Splits on Unicode White_Space (UTF-8 aware). Case and all other bytes are
// preserved. Shared by the n-gram distance and distinct-n so both see the
// same tokens.
std::vector<std::string_view> tokenize(std::string_view text);

}  // namespace aepo
