// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "annotation.hpp"
#include "distance.hpp"
#include "selection.hpp"

namespace aepo {

enum class JudgeKind { kAuto, kTable, kRemote, kHuman };

JudgeKind parse_judge(std::string_view name);
const char* to_string(JudgeKind kind);

inline const std::vector<double> kDefaultLambdaSweep = {0.0, 0.5, 1.0, 2.0};

struct RunConfig {
  StrategyKind strategy = StrategyKind::kAepo;
  DistanceKind distance = DistanceKind::kCosine;
  int max_n = 4;
  size_t k = 2;
  double lambda = 1.0;
  bool lambda_sweep = false;
  std::optional<size_t> n_cap;
  std::optional<SolverKind> solver;  // unset: exact while C(N, k) <= enumeration_cap
  uint64_t seed = 0;
  BudgetMode budget = BudgetMode::kMatched;
  uint64_t enumeration_cap = kDefaultEnumerationCap;
  JudgeKind judge = JudgeKind::kAuto;
  size_t concurrency = 0;  // 0: hardware concurrency

  std::filesystem::path input;
  std::filesystem::path embeddings;
  std::filesystem::path scores;
  std::filesystem::path perplexity;
  std::vector<std::filesystem::path> selections;
  std::vector<std::filesystem::path> preferences;
  std::filesystem::path output;
  std::filesystem::path report;
  std::filesystem::path journal;
  std::filesystem::path ui_dir;

  std::string scorer_url;
  int timeout_ms = 30'000;
  std::string host = "127.0.0.1";
  int port = 8080;
};

// Sets one field from its command-line spelling ("n-cap", "lambda", ...).
// "selection" and "preferences" append; every other key overwrites.
void set_option(RunConfig& config, std::string_view key, std::string_view value);

// Field-level checks shared by every command. Throws kInvalidArgument.
void validate(const RunConfig& config);

// Hex FNV-1a digest of the algorithm knobs (not the paths), recorded in
// every output so runs with identical settings can be matched.
std::string config_hash(const RunConfig& config);

size_t effective_concurrency(const RunConfig& config);

}  // namespace aepo
