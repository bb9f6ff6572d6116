// SPDX-License-Identifier: Apache-2.0
#include "metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "error.hpp"
#include "json.hpp"
#include "selection.hpp"
#include "text.hpp"

namespace aepo {
namespace {

void check_indices(std::span<const size_t> subset, const DistanceMatrix& matrix) {
  if (subset.empty()) throw Error(ErrorCode::kInvalidArgument, "empty selection");
  for (size_t i : subset) {
    if (i >= matrix.size()) throw Error(ErrorCode::kInvalidArgument, "selection index out of range");
  }
}

struct Mean {
  double sum = 0.0;
  size_t count = 0;

  void add(double v) {
    sum += v;
    ++count;
  }
  void add(const std::optional<double>& v) {
    if (v) add(*v);
  }
  std::optional<double> value() const {
    return count == 0 ? std::nullopt : std::optional<double>(sum / static_cast<double>(count));
  }
};

std::string format_value(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

std::string format_lambda(const std::optional<double>& lambda) {
  if (!lambda) return "-";
  return nlohmann::json(*lambda).dump();
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::optional<double> distinct_n(std::string_view text, int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "distinct-n needs n >= 1");
  const auto tokens = tokenize(text);
  const size_t order = static_cast<size_t>(n);
  if (tokens.size() < order) return std::nullopt;
  std::set<std::vector<std::string_view>> grams;
  for (size_t s = 0; s + order <= tokens.size(); ++s) {
    grams.emplace(tokens.begin() + static_cast<std::ptrdiff_t>(s),
                  tokens.begin() + static_cast<std::ptrdiff_t>(s + order));
  }
  return static_cast<double>(grams.size()) / static_cast<double>(tokens.size());
}

double pairwise_distance(std::span<const size_t> subset, const DistanceMatrix& matrix) {
  check_indices(subset, matrix);
  if (subset.size() < 2) throw Error(ErrorCode::kInvalidArgument, "pairwise distance needs at least 2 responses");
  double sum = 0.0;
  size_t pairs = 0;
  for (size_t a = 0; a < subset.size(); ++a) {
    for (size_t b = a + 1; b < subset.size(); ++b) {
      sum += matrix(subset[a], subset[b]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

double representativeness(std::span<const size_t> subset, const DistanceMatrix& matrix) {
  check_indices(subset, matrix);
  double sum = 0.0;
  for (size_t y : subset) {
    for (double d : matrix.row(y)) sum += d;
  }
  return 1.0 - sum / (static_cast<double>(subset.size()) * static_cast<double>(matrix.size()));
}

double representativeness_literal(std::span<const size_t> subset, const DistanceMatrix& matrix) {
  return -f_rep(subset, matrix) / static_cast<double>(matrix.size());
}

double mean_reward(std::span<const SelectedScores> selections) {
  Mean mean;
  for (const auto& s : selections) {
    if (s.table == nullptr) throw Error(ErrorCode::kInvalidArgument, "missing reward scores");
    for (size_t i : s.indices) {
      if (i >= s.table->scores.size()) {
        throw Error(ErrorCode::kAlignment, "reward table for \"" + s.table->id + "\" has no score " + std::to_string(i));
      }
      mean.add(s.table->scores[i]);
    }
  }
  if (mean.count == 0) throw Error(ErrorCode::kInvalidArgument, "mean reward of an empty dataset");
  return *mean.value();
}

InstructionMetrics measure_instruction(const GroupKey& key, const std::string& id,
                                       std::span<const size_t> indices, const DistanceMatrix& matrix,
                                       const PreferencePair* pair, const ScoreTable* rewards) {
  InstructionMetrics m;
  m.key = key;
  m.id = id;
  m.selected = indices.size();
  m.pairwise_distance = pairwise_distance(indices, matrix);
  m.representativeness = representativeness(indices, matrix);
  m.representativeness_literal = representativeness_literal(indices, matrix);
  if (pair != nullptr) {
    for (int n = 1; n <= kMaxDistinctOrder; ++n) {
      m.distinct_chosen[static_cast<size_t>(n - 1)] = distinct_n(pair->chosen, n);
      m.distinct_rejected[static_cast<size_t>(n - 1)] = distinct_n(pair->rejected, n);
    }
  }
  if (rewards != nullptr) {
    for (size_t i : indices) {
      if (i >= rewards->scores.size()) throw Error(ErrorCode::kAlignment, "reward table shorter than selection");
      m.selected_rewards.push_back(rewards->scores[i]);
    }
  }
  return m;
}

DatasetReport dataset_report(std::span<const InstructionMetrics> records, std::string distance,
                             std::string config_hash) {
  struct Accumulator {
    GroupKey key;
    size_t instructions = 0;
    Mean distance, representativeness, literal, reward;
    std::array<Mean, kMaxDistinctOrder> chosen, rejected;
  };
  std::vector<Accumulator> groups;
  for (const auto& r : records) {
    if (r.selected != r.key.k) {
      throw Error(ErrorCode::kValidation, "record \"" + r.id + "\" selects " + std::to_string(r.selected) +
                                              " responses but is keyed k=" + std::to_string(r.key.k));
    }
    if (r.key.lambda && r.key.strategy != "aepo") {
      throw Error(ErrorCode::kValidation, "record \"" + r.id + "\" carries lambda for strategy " + r.key.strategy);
    }
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Accumulator& g) { return g.key == r.key; });
    if (it == groups.end()) {
      groups.push_back(Accumulator{r.key});
      it = std::prev(groups.end());
    }
    ++it->instructions;
    it->distance.add(r.pairwise_distance);
    it->representativeness.add(r.representativeness);
    it->literal.add(r.representativeness_literal);
    for (size_t n = 0; n < kMaxDistinctOrder; ++n) {
      it->chosen[n].add(r.distinct_chosen[n]);
      it->rejected[n].add(r.distinct_rejected[n]);
    }
    for (double v : r.selected_rewards) it->reward.add(v);
  }
  DatasetReport report;
  report.distance = std::move(distance);
  report.config_hash = std::move(config_hash);
  for (const auto& g : groups) {
    ReportRow row;
    row.key = g.key;
    row.instructions = g.instructions;
    row.mean_pairwise_distance = *g.distance.value();
    row.mean_pairwise_similarity = 1.0 - row.mean_pairwise_distance;
    row.representativeness = *g.representativeness.value();
    row.representativeness_literal = *g.literal.value();
    for (size_t n = 0; n < kMaxDistinctOrder; ++n) {
      row.distinct_chosen[n] = g.chosen[n].value();
      row.distinct_rejected[n] = g.rejected[n].value();
    }
    row.mean_reward = g.reward.value();
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string format_report_table(const DatasetReport& report) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"strategy", "N", "k", "lambda", "insts", "pair_dist", "pair_sim", "rep", "rep_literal",
                   "d1_chosen", "d2_chosen", "d3_chosen", "d1_rejected", "d2_rejected", "d3_rejected",
                   "mean_reward"});
  for (const auto& row : report.rows) {
    std::vector<std::string> line{row.key.strategy,
                                  std::to_string(row.key.n),
                                  std::to_string(row.key.k),
                                  format_lambda(row.key.lambda),
                                  std::to_string(row.instructions),
                                  format_value(row.mean_pairwise_distance),
                                  format_value(row.mean_pairwise_similarity),
                                  format_value(row.representativeness),
                                  format_value(row.representativeness_literal)};
    for (const auto& v : row.distinct_chosen) line.push_back(format_value(v));
    for (const auto& v : row.distinct_rejected) line.push_back(format_value(v));
    line.push_back(format_value(row.mean_reward));
    cells.push_back(std::move(line));
  }
  std::vector<size_t> width(cells.front().size(), 0);
  for (const auto& line : cells) {
    for (size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  std::ostringstream out;
  for (size_t r = 0; r < cells.size(); ++r) {
    for (size_t c = 0; c < cells[r].size(); ++c) {
      if (c > 0) out << " | ";
      out << cells[r][c] << std::string(width[c] - cells[r][c].size(), ' ');
    }
    out << '\n';
    if (r == 0) {
      for (size_t c = 0; c < width.size(); ++c) {
        if (c > 0) out << "-|-";
        out << std::string(width[c], '-');
      }
      out << '\n';
    }
  }
  return out.str();
}

std::string format_report_records(const DatasetReport& report) {
  std::ostringstream out;
  for (const auto& row : report.rows) {
    nlohmann::ordered_json record;
    record["strategy"] = row.key.strategy;
    record["n"] = row.key.n;
    record["k"] = row.key.k;
    record["lambda"] = optional_json(row.key.lambda);
    record["distance"] = report.distance;
    record["instructions"] = row.instructions;
    record["mean_pairwise_distance"] = row.mean_pairwise_distance;
    record["mean_pairwise_similarity"] = row.mean_pairwise_similarity;
    record["representativeness"] = row.representativeness;
    record["representativeness_literal"] = row.representativeness_literal;
    for (size_t n = 0; n < kMaxDistinctOrder; ++n) {
      record["distinct_" + std::to_string(n + 1) + "_chosen"] = optional_json(row.distinct_chosen[n]);
    }
    for (size_t n = 0; n < kMaxDistinctOrder; ++n) {
      record["distinct_" + std::to_string(n + 1) + "_rejected"] = optional_json(row.distinct_rejected[n]);
    }
    record["mean_reward"] = optional_json(row.mean_reward);
    record["config_hash"] = report.config_hash;
    out << record.dump() << '\n';
  }
  return out.str();
}

void write_report(const DatasetReport& report, const std::filesystem::path& path) {
  const auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + p.string());
    out << text;
    if (!out.flush()) throw Error(ErrorCode::kIo, "write failed for " + p.string());
  };
  write(path, format_report_table(report));
  write(std::filesystem::path(path.string() + ".jsonl"), format_report_records(report));
}

}  // namespace aepo
