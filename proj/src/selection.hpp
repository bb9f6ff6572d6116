// SPDX-License-Identifier: Apache-2.0
//
// Subset selection over one candidate pool: the representativeness +
// diversity objective with exact and greedy solvers, plus the baseline
// strategies (random, West-of-N, k-center coreset, perplexity extremes).
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dataset.hpp"
#include "distance.hpp"

namespace aepo {

enum class StrategyKind { kAepo, kRandom, kWon, kCoreset, kPerplexity };
enum class SolverKind { kExact, kGreedy, kNotApplicable };

StrategyKind parse_strategy(std::string_view name);
const char* to_string(StrategyKind kind);
SolverKind parse_solver(std::string_view name);
const char* to_string(SolverKind kind);

struct SelectionResult {
  std::vector<size_t> indices;
  StrategyKind strategy = StrategyKind::kAepo;
  SolverKind solver = SolverKind::kNotApplicable;
  // Set only for kAepo.
  std::optional<double> lambda;
  std::optional<double> objective;
  // Filled whenever a distance matrix was available.
  std::optional<double> f_rep;
  std::optional<double> f_div;

  bool operator==(const SelectionResult&) const = default;
};

inline constexpr uint64_t kDefaultEnumerationCap = 10'000'000;

// C(n, k), saturating at UINT64_MAX.
uint64_t binomial(uint64_t n, uint64_t k);

// Sum over selected y of -(1/N) * sum_{y' in pool} d(y, y'). Always <= 0.
double f_rep(std::span<const size_t> subset, const DistanceMatrix& matrix);

// (1/|Y|) * sum over ordered pairs y1 != y2 in Y of d(y1, y2). Requires |Y| >= 2.
double f_div(std::span<const size_t> subset, const DistanceMatrix& matrix);

// f_rep + lambda * f_div, with f_div taken as 0 for singletons.
double aepo_objective(std::span<const size_t> subset, const DistanceMatrix& matrix, double lambda);

// Maximises the objective over all C(N, k) subsets. Ties go to the
// lexicographically smallest sorted index tuple. Throws kCapExceeded when
// C(N, k) > cap.
SelectionResult select_exact(const DistanceMatrix& matrix, size_t k, double lambda,
                             uint64_t cap = kDefaultEnumerationCap);

// Adds one index at a time, each maximising the objective of the augmented
// set; ties go to the smallest index. Indices are reported in pick order.
SelectionResult select_greedy(const DistanceMatrix& matrix, size_t k, double lambda);

SelectionResult select_random(size_t n, size_t k, uint64_t seed);

// k-Center-Greedy seeded at the 1-center.
SelectionResult select_coreset(const DistanceMatrix& matrix, size_t k);

// {argmax PP, argmin PP}; {0, 1} when all perplexities are equal.
SelectionResult select_perplexity_pair(const ScoreTable& perplexities);

SelectionResult select_won(size_t n);

// Fills f_rep / f_div for any strategy's result.
void attach_objectives(SelectionResult& result, const DistanceMatrix& matrix);

// max over pool of min distance to the subset.
double covering_radius(std::span<const size_t> subset, const DistanceMatrix& matrix);

}  // namespace aepo
