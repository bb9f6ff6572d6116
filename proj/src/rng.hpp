// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace aepo {

// Derives an independent stream seed from a run seed and a key such as an
// instruction id, so per-instruction draws do not depend on processing order.
uint64_t mix_seed(uint64_t seed, std::string_view key);

// Unbiased draw from [0, bound). Avoids std::uniform_int_distribution so the
// same seed produces the same stream with any standard library.
uint64_t uniform_below(std::mt19937_64& rng, uint64_t bound);

template <typename T>
void shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (size_t i = items.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(uniform_below(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace aepo
