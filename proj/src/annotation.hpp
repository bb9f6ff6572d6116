// SPDX-License-Identifier: Apache-2.0
//
// West-of-N labelling over the selected subset, annotation budget
// accounting, and the score-table / remote-scorer judgment sources. The
// interactive (human) source lives in session.hpp.
#pragma once

#include <chrono>
#include <cstddef>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dataset.hpp"
#include "selection.hpp"

namespace aepo {

struct Label {
  size_t chosen;
  size_t rejected;

  bool operator==(const Label&) const = default;
};

// chosen = argmax, rejected = argmin, each tie going to the smallest pool
// index. When every score is equal, rejected is the smallest index other
// than chosen.
Label won_label(std::span<const std::pair<size_t, double>> scores);

struct LedgerEntry {
  std::string id;
  size_t units;

  bool operator==(const LedgerEntry&) const = default;
};

// One unit per response included in a ranking judgment. Mutations are
// serialised so concurrent annotators can share a ledger.
class BudgetLedger {
 public:
  BudgetLedger() = default;
  BudgetLedger(size_t planned_instructions, size_t planned_annotations)
      : planned_instructions_(planned_instructions), planned_annotations_(planned_annotations) {}

  BudgetLedger(const BudgetLedger&) = delete;
  BudgetLedger& operator=(const BudgetLedger&) = delete;

  void charge(const std::string& id, size_t units);

  size_t planned_instructions() const { return planned_instructions_; }
  size_t planned_annotations() const { return planned_annotations_; }
  size_t consumed() const;
  std::vector<LedgerEntry> entries() const;

 private:
  size_t planned_instructions_ = 0;
  size_t planned_annotations_ = 0;
  mutable std::mutex mu_;
  size_t consumed_ = 0;
  std::vector<LedgerEntry> entries_;
};

enum class BudgetMode { kMatched, kUnconstrained };

BudgetMode parse_budget_mode(std::string_view name);
const char* to_string(BudgetMode mode);

struct BudgetPlan {
  size_t instructions;
  size_t annotations;

  bool operator==(const BudgetPlan&) const = default;
};

// Instructions to use and annotations to spend for a corpus of
// `corpus_size` pools of N responses. In matched mode West-of-N keeps
// floor(|D| * k / N) instructions so its spend equals k * |D|.
BudgetPlan budget_plan(StrategyKind strategy, size_t n, size_t k, size_t corpus_size,
                       BudgetMode mode = BudgetMode::kMatched);

// Checks indices are distinct, in range, and at least two.
void validate_selection(const SelectionResult& selection, const CandidatePool& pool);

PreferencePair make_preference(const SelectionResult& selection, const CandidatePool& pool, Label label);

PreferencePair annotate_with_table(const SelectionResult& selection, const CandidatePool& pool,
                                   const ScoreTable& rewards, BudgetLedger& ledger);

struct RemoteScorerOptions {
  std::string url;  // e.g. http://127.0.0.1:8000 ; requests go to <url>/score
  std::chrono::milliseconds timeout{30'000};
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
};

// Client for POST /score {"instruction", "response"} -> {"score"}.
// Transport failures (connection errors, 5xx) are retried with exponential
// backoff; a malformed or non-finite score is a validation error and is not
// retried.
class RemoteScorer {
 public:
  explicit RemoteScorer(RemoteScorerOptions options);

  double score(const std::string& instruction, const std::string& response) const;

 private:
  RemoteScorerOptions options_;
  std::string scheme_host_port_;
  std::string path_;
};

// Scores every selected response, then labels as annotate_with_table. On
// any failure nothing is charged.
PreferencePair annotate_with_remote(const SelectionResult& selection, const CandidatePool& pool,
                                    const RemoteScorer& scorer, BudgetLedger& ledger);

}  // namespace aepo
