// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dataset.hpp"

namespace aepo {

enum class DistanceKind { kCosine, kNgram };

DistanceKind parse_distance_kind(std::string_view name);
const char* to_string(DistanceKind kind);

// Dense symmetric n x n dissimilarities in [0, 1] with a zero diagonal.
// Instances can only be obtained through the validating factories, so any
// DistanceMatrix in hand satisfies those invariants.
class DistanceMatrix {
 public:
  static DistanceMatrix from_dense(size_t n, std::vector<double> entries);

  size_t size() const { return n_; }
  double operator()(size_t i, size_t j) const { return entries_[i * n_ + j]; }
  std::span<const double> row(size_t i) const { return {entries_.data() + i * n_, n_}; }
  const std::vector<double>& entries() const { return entries_; }

 private:
  DistanceMatrix(size_t n, std::vector<double> entries) : n_(n), entries_(std::move(entries)) {}

  size_t n_ = 0;
  std::vector<double> entries_;
};

// Distances below this are reported as exactly zero, so parallel vectors
// compare equal despite rounding in the dot product.
inline constexpr double kCosineZeroSnap = 1e-12;

// max(0, min(1, 1 - cos(u, v))).
double cosine_distance(std::span<const float> u, std::span<const float> v);

// Directed BLEU-style score of `hypothesis` against `reference`: clipped
// n-gram precision (add-one smoothed for n >= 2), geometric mean over
// n = 1..max_n, times the brevity penalty.
double ngram_overlap_score(std::string_view hypothesis, std::string_view reference, int max_n);

// 1 - score, symmetrised as the larger of the two directed distances.
double ngram_overlap_distance(std::string_view a, std::string_view b, int max_n = 4);

using ElementDistance = std::function<double(size_t, size_t)>;

// Evaluates `distance` once per unordered pair i < j and mirrors it.
DistanceMatrix build_distance_matrix(size_t n, const ElementDistance& distance);

// `embeddings` must be non-null iff kind is kCosine.
DistanceMatrix build_distance_matrix(const CandidatePool& pool, DistanceKind kind,
                                     const EmbeddingSet* embeddings, int max_n = 4);

struct TriangleViolation {
  size_t i, j, k;  // d(i, k) > d(i, j) + d(j, k)

  bool operator==(const TriangleViolation&) const = default;
};

// Every (i, j, k) with i < k and j distinct from both whose detour through j
// is shorter than the direct distance by more than `tolerance`.
std::vector<TriangleViolation> metric_violations(const DistanceMatrix& matrix, double tolerance = 0.0);

}  // namespace aepo
