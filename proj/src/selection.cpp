// SPDX-License-Identifier: Apache-2.0
#include "selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "error.hpp"
#include "rng.hpp"

namespace aepo {
namespace {

void check_k(size_t n, size_t k) {
  if (k < 2 || k > n) {
    throw Error(ErrorCode::kInvalidArgument, "subset size k=" + std::to_string(k) + " must satisfy 2 <= k <= N=" +
                                                 std::to_string(n));
  }
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda must be a finite value >= 0");
  }
}

void check_subset(std::span<const size_t> subset, const DistanceMatrix& matrix) {
  if (subset.empty()) throw Error(ErrorCode::kInvalidArgument, "subset is empty");
  for (size_t idx : subset) {
    if (idx >= matrix.size()) {
      throw Error(ErrorCode::kInvalidArgument, "index " + std::to_string(idx) + " out of range for N=" +
                                                   std::to_string(matrix.size()));
    }
  }
}

// Per-candidate representativeness -(1/N) * sum_j d(i, j), accumulated in
// index order so every caller produces identical bits.
double representativeness_of(size_t i, const DistanceMatrix& matrix) {
  double sum = 0.0;
  for (double d : matrix.row(i)) sum += d;
  return -(sum / static_cast<double>(matrix.size()));
}

std::vector<double> representativeness_table(const DistanceMatrix& matrix) {
  std::vector<double> rep(matrix.size());
  for (size_t i = 0; i < matrix.size(); ++i) rep[i] = representativeness_of(i, matrix);
  return rep;
}

double ordered_pair_sum(std::span<const size_t> subset, const DistanceMatrix& matrix) {
  double sum = 0.0;
  for (size_t a : subset) {
    for (size_t b : subset) {
      if (a != b) sum += matrix(a, b);
    }
  }
  return sum;
}

// Same arithmetic as aepo_objective(), with the row sums precomputed.
double objective_with_table(std::span<const size_t> subset, const DistanceMatrix& matrix,
                            const std::vector<double>& rep, double lambda) {
  double fr = 0.0;
  for (size_t y : subset) fr += rep[y];
  const double fd = subset.size() < 2 ? 0.0 : ordered_pair_sum(subset, matrix) / static_cast<double>(subset.size());
  return fr + lambda * fd;
}

void fill_aepo_fields(SelectionResult& result, const DistanceMatrix& matrix, double lambda) {
  std::vector<size_t> sorted = result.indices;
  std::sort(sorted.begin(), sorted.end());
  result.lambda = lambda;
  result.f_rep = f_rep(sorted, matrix);
  result.f_div = f_div(sorted, matrix);
  result.objective = aepo_objective(sorted, matrix, lambda);
}

}  // namespace

StrategyKind parse_strategy(std::string_view name) {
  if (name == "aepo") return StrategyKind::kAepo;
  if (name == "random") return StrategyKind::kRandom;
  if (name == "won") return StrategyKind::kWon;
  if (name == "coreset") return StrategyKind::kCoreset;
  if (name == "perplexity") return StrategyKind::kPerplexity;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown strategy \"" + std::string(name) + "\" (expected aepo|random|won|coreset|perplexity)");
}

const char* to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kAepo: return "aepo";
    case StrategyKind::kRandom: return "random";
    case StrategyKind::kWon: return "won";
    case StrategyKind::kCoreset: return "coreset";
    case StrategyKind::kPerplexity: return "perplexity";
  }
  return "?";
}

SolverKind parse_solver(std::string_view name) {
  if (name == "exact") return SolverKind::kExact;
  if (name == "greedy") return SolverKind::kGreedy;
  if (name == "n/a") return SolverKind::kNotApplicable;
  throw Error(ErrorCode::kInvalidArgument, "unknown solver \"" + std::string(name) + "\" (expected exact|greedy)");
}

const char* to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::kExact: return "exact";
    case SolverKind::kGreedy: return "greedy";
    case SolverKind::kNotApplicable: return "n/a";
  }
  return "?";
}

uint64_t binomial(uint64_t n, uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  uint64_t result = 1;
  for (uint64_t i = 1; i <= k; ++i) {
    // result * (n - k + i) / i stays integral at every step.
    const uint64_t factor = n - k + i;
    const uint64_t g = std::gcd(result, i);
    const uint64_t r = result / g;
    const uint64_t f = factor / (i / g);
    if (r != 0 && f > std::numeric_limits<uint64_t>::max() / r) return std::numeric_limits<uint64_t>::max();
    result = r * f;
  }
  return result;
}

double f_rep(std::span<const size_t> subset, const DistanceMatrix& matrix) {
  check_subset(subset, matrix);
  double sum = 0.0;
  for (size_t y : subset) sum += representativeness_of(y, matrix);
  return sum;
}

double f_div(std::span<const size_t> subset, const DistanceMatrix& matrix) {
  check_subset(subset, matrix);
  if (subset.size() < 2) throw Error(ErrorCode::kInvalidArgument, "f_div needs at least 2 responses");
  return ordered_pair_sum(subset, matrix) / static_cast<double>(subset.size());
}

double aepo_objective(std::span<const size_t> subset, const DistanceMatrix& matrix, double lambda) {
  const double fr = f_rep(subset, matrix);
  const double fd = subset.size() < 2 ? 0.0 : f_div(subset, matrix);
  return fr + lambda * fd;
}

SelectionResult select_exact(const DistanceMatrix& matrix, size_t k, double lambda, uint64_t cap) {
  const size_t n = matrix.size();
  check_k(n, k);
  check_lambda(lambda);
  const uint64_t count = binomial(n, k);
  if (count > cap) {
    throw Error(ErrorCode::kCapExceeded, "exact search over C(" + std::to_string(n) + "," + std::to_string(k) +
                                             ") subsets exceeds the cap of " + std::to_string(cap) +
                                             "; use the greedy solver");
  }
  const auto rep = representativeness_table(matrix);
  std::vector<size_t> current(k);
  std::iota(current.begin(), current.end(), size_t{0});
  std::vector<size_t> best = current;
  double best_value = objective_with_table(current, matrix, rep, lambda);
  while (true) {
    // Next combination in lexicographic order.
    size_t pos = k;
    while (pos > 0 && current[pos - 1] == n - k + pos - 1) --pos;
    if (pos == 0) break;
    ++current[pos - 1];
    for (size_t i = pos; i < k; ++i) current[i] = current[i - 1] + 1;
    const double value = objective_with_table(current, matrix, rep, lambda);
    if (value > best_value) {
      best_value = value;
      best = current;
    }
  }
  SelectionResult result;
  result.indices = std::move(best);
  result.strategy = StrategyKind::kAepo;
  result.solver = SolverKind::kExact;
  fill_aepo_fields(result, matrix, lambda);
  return result;
}

SelectionResult select_greedy(const DistanceMatrix& matrix, size_t k, double lambda) {
  const size_t n = matrix.size();
  check_k(n, k);
  check_lambda(lambda);
  const auto rep = representativeness_table(matrix);
  std::vector<size_t> picked;  // sorted, for canonical evaluation
  std::vector<size_t> order;
  std::vector<bool> used(n, false);
  std::vector<size_t> trial;
  while (picked.size() < k) {
    size_t best_index = n;
    double best_value = -std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < n; ++c) {
      if (used[c]) continue;
      trial = picked;
      trial.insert(std::upper_bound(trial.begin(), trial.end(), c), c);
      const double value = objective_with_table(trial, matrix, rep, lambda);
      if (best_index == n || value > best_value) {
        best_index = c;
        best_value = value;
      }
    }
    used[best_index] = true;
    order.push_back(best_index);
    picked.insert(std::upper_bound(picked.begin(), picked.end(), best_index), best_index);
  }
  SelectionResult result;
  result.strategy = StrategyKind::kAepo;
  result.solver = SolverKind::kGreedy;
  result.indices = std::move(order);
  fill_aepo_fields(result, matrix, lambda);
  return result;
}

SelectionResult select_random(size_t n, size_t k, uint64_t seed) {
  if (k > n) {
    throw Error(ErrorCode::kInvalidArgument, "cannot sample k=" + std::to_string(k) + " of n=" + std::to_string(n));
  }
  std::mt19937_64 rng(seed);
  std::vector<size_t> pool(n);
  std::iota(pool.begin(), pool.end(), size_t{0});
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + static_cast<size_t>(uniform_below(rng, n - i));
    std::swap(pool[i], pool[j]);
  }
  SelectionResult result;
  result.indices.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(result.indices.begin(), result.indices.end());
  result.strategy = StrategyKind::kRandom;
  result.solver = SolverKind::kNotApplicable;
  return result;
}

SelectionResult select_coreset(const DistanceMatrix& matrix, size_t k) {
  const size_t n = matrix.size();
  check_k(n, k);
  size_t seed = 0;
  double seed_radius = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < n; ++i) {
    const auto row = matrix.row(i);
    const double radius = *std::max_element(row.begin(), row.end());
    if (radius < seed_radius) {
      seed_radius = radius;
      seed = i;
    }
  }
  std::vector<size_t> chosen{seed};
  std::vector<bool> used(n, false);
  used[seed] = true;
  std::vector<double> nearest(matrix.row(seed).begin(), matrix.row(seed).end());
  while (chosen.size() < k) {
    size_t best = n;
    for (size_t c = 0; c < n; ++c) {
      if (used[c]) continue;
      if (best == n || nearest[c] > nearest[best]) best = c;
    }
    used[best] = true;
    chosen.push_back(best);
    for (size_t c = 0; c < n; ++c) nearest[c] = std::min(nearest[c], matrix(best, c));
  }
  SelectionResult result;
  result.indices = std::move(chosen);
  result.strategy = StrategyKind::kCoreset;
  result.solver = SolverKind::kNotApplicable;
  attach_objectives(result, matrix);
  return result;
}

SelectionResult select_perplexity_pair(const ScoreTable& perplexities) {
  if (perplexities.kind != ScoreKind::kPerplexity) {
    throw Error(ErrorCode::kInvalidArgument, "perplexity selection needs a perplexity table, got " +
                                                 std::string(to_string(perplexities.kind)));
  }
  const auto& pp = perplexities.scores;
  if (pp.size() < 2) throw Error(ErrorCode::kInvalidArgument, "perplexity selection needs N >= 2");
  size_t hi = 0, lo = 0;
  for (size_t i = 1; i < pp.size(); ++i) {
    if (pp[i] > pp[hi]) hi = i;
    if (pp[i] < pp[lo]) lo = i;
  }
  SelectionResult result;
  result.indices = hi == lo ? std::vector<size_t>{0, 1} : std::vector<size_t>{hi, lo};
  result.strategy = StrategyKind::kPerplexity;
  result.solver = SolverKind::kNotApplicable;
  return result;
}

SelectionResult select_won(size_t n) {
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "West-of-N needs n >= 2");
  SelectionResult result;
  result.indices.resize(n);
  std::iota(result.indices.begin(), result.indices.end(), size_t{0});
  result.strategy = StrategyKind::kWon;
  result.solver = SolverKind::kNotApplicable;
  return result;
}

void attach_objectives(SelectionResult& result, const DistanceMatrix& matrix) {
  std::vector<size_t> sorted = result.indices;
  std::sort(sorted.begin(), sorted.end());
  result.f_rep = f_rep(sorted, matrix);
  if (sorted.size() >= 2) result.f_div = f_div(sorted, matrix);
}

double covering_radius(std::span<const size_t> subset, const DistanceMatrix& matrix) {
  check_subset(subset, matrix);
  double radius = 0.0;
  for (size_t y = 0; y < matrix.size(); ++y) {
    double nearest = std::numeric_limits<double>::infinity();
    for (size_t s : subset) nearest = std::min(nearest, matrix(y, s));
    radius = std::max(radius, nearest);
  }
  return radius;
}

}  // namespace aepo
