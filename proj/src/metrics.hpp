// SPDX-License-Identifier: Apache-2.0
//
// Dataset-quality measurements: lexical diversity (distinct-n), semantic
// diversity (mean pairwise distance), representativeness and mean reward,
// aggregated into report rows keyed by (strategy, N, k, lambda).
#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dataset.hpp"
#include "distance.hpp"

namespace aepo {

// |unique n-grams| / token count; nullopt when the text has fewer than n
// tokens.
std::optional<double> distinct_n(std::string_view text, int n);

// Mean of d over unordered pairs in the subset.
double pairwise_distance(std::span<const size_t> subset, const DistanceMatrix& matrix);

// 1 - mean distance from the selected responses to the whole pool.
double representativeness(std::span<const size_t> subset, const DistanceMatrix& matrix);

// -f_rep(Y) / |Y_cand|, reported alongside the similarity-scale value.
double representativeness_literal(std::span<const size_t> subset, const DistanceMatrix& matrix);

struct SelectedScores {
  std::vector<size_t> indices;
  const ScoreTable* table = nullptr;
};

// Flat mean over every selected response of every instruction.
double mean_reward(std::span<const SelectedScores> selections);

struct GroupKey {
  std::string strategy;
  size_t n = 0;
  size_t k = 0;
  std::optional<double> lambda;

  bool operator==(const GroupKey&) const = default;
};

inline constexpr int kMaxDistinctOrder = 3;

struct InstructionMetrics {
  GroupKey key;
  std::string id;
  size_t selected = 0;
  double pairwise_distance = 0.0;
  double representativeness = 0.0;
  double representativeness_literal = 0.0;
  std::array<std::optional<double>, kMaxDistinctOrder> distinct_chosen{};
  std::array<std::optional<double>, kMaxDistinctOrder> distinct_rejected{};
  std::vector<double> selected_rewards;
};

// `pair` and `rewards` are optional.
InstructionMetrics measure_instruction(const GroupKey& key, const std::string& id,
                                       std::span<const size_t> indices, const DistanceMatrix& matrix,
                                       const PreferencePair* pair, const ScoreTable* rewards);

struct ReportRow {
  GroupKey key;
  size_t instructions = 0;
  double mean_pairwise_distance = 0.0;
  double mean_pairwise_similarity = 0.0;
  double representativeness = 0.0;
  double representativeness_literal = 0.0;
  std::array<std::optional<double>, kMaxDistinctOrder> distinct_chosen{};
  std::array<std::optional<double>, kMaxDistinctOrder> distinct_rejected{};
  std::optional<double> mean_reward;
};

struct DatasetReport {
  std::string distance;
  std::string config_hash;
  std::vector<ReportRow> rows;  // first-seen order of keys
};

// Throws kValidation when a record disagrees with its own key (selected
// count != k, lambda on a non-aepo strategy).
DatasetReport dataset_report(std::span<const InstructionMetrics> records, std::string distance = "",
                             std::string config_hash = "");

std::string format_report_table(const DatasetReport& report);
std::string format_report_records(const DatasetReport& report);

// Writes the aligned table to `path` and the line records to `path`.jsonl.
void write_report(const DatasetReport& report, const std::filesystem::path& path);

}  // namespace aepo
