// SPDX-License-Identifier: Apache-2.0
//
// Interactive annotation: one human task per instruction, judged by picking
// the best and worst of the k selected responses. Every task and judgment is
// appended to a journal before it takes effect, and reopening a journal
// replays it, so an interrupted session resumes without losing judgments.
#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "annotation.hpp"
#include "dataset.hpp"
#include "selection.hpp"

namespace aepo {

enum class TaskStatus { kPending, kDone };

struct HumanTask {
  std::string task_id;  // the instruction id; one task per instruction
  std::string instruction;
  std::vector<std::string> responses;  // display order
  std::vector<size_t> permutation;     // display slot -> pool index
  std::string strategy;
  std::optional<double> lambda;
  TaskStatus status = TaskStatus::kPending;
  std::optional<size_t> best;   // display slot
  std::optional<size_t> worst;  // display slot

  size_t k() const { return responses.size(); }

  bool operator==(const HumanTask&) const = default;
};

struct SessionProgress {
  size_t done = 0;
  size_t pending = 0;
  size_t consumed_annotations = 0;

  bool operator==(const SessionProgress&) const = default;
};

class AnnotationSession {
 public:
  // Opens the journal at `path`, creating it if absent and replaying it
  // otherwise. A malformed or inconsistent journal line is a kParse error
  // naming the line. `seed` drives the display permutations.
  explicit AnnotationSession(std::filesystem::path journal, uint64_t seed = 0,
                             std::chrono::seconds lease = std::chrono::minutes(15));
  ~AnnotationSession();

  AnnotationSession(const AnnotationSession&) = delete;
  AnnotationSession& operator=(const AnnotationSession&) = delete;

  HumanTask enqueue(const SelectionResult& selection, const CandidatePool& pool);

  // Maps display slots through the task's permutation, charges k units and
  // marks the task done. Re-submitting a done task is a kConflict. The
  // session keeps its own count; `ledger`, when given, is charged as well.
  PreferencePair apply_judgment(const std::string& task_id, size_t best, size_t worst,
                                BudgetLedger* ledger = nullptr);

  // The cursor's outstanding task if it has one, else the oldest pending
  // task not leased to another cursor.
  std::optional<HumanTask> next(const std::string& cursor = "default");
  std::optional<HumanTask> task(const std::string& task_id) const;
  SessionProgress progress() const;

  // Preference pairs of all done tasks, in enqueue order.
  std::vector<PreferencePair> pairs() const;
  size_t consumed_annotations() const;

  void close();
  bool is_open() const;
  const std::filesystem::path& journal_path() const { return path_; }

 private:
  struct Lease {
    std::string task_id;
    std::chrono::steady_clock::time_point expires;
  };

  void replay();
  void append(const std::string& line);
  PreferencePair pair_for(const HumanTask& task) const;
  void require_open() const;

  std::filesystem::path path_;
  uint64_t seed_;
  std::chrono::seconds lease_;
  mutable std::mutex mu_;
  std::FILE* journal_ = nullptr;
  std::vector<std::string> order_;
  std::map<std::string, HumanTask> tasks_;
  std::map<std::string, Lease> leases_;  // by cursor
  size_t consumed_ = 0;
};

}  // namespace aepo
