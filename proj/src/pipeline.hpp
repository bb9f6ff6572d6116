// SPDX-License-Identifier: Apache-2.0
//
// Corpus-level orchestration: select a subset per instruction, annotate it,
// and report dataset statistics. Each stage reads and writes line-record
// files so stages can be rerun or hand-edited independently.
#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "config.hpp"
#include "dataset.hpp"
#include "metrics.hpp"
#include "selection.hpp"

namespace aepo {

struct SelectionRecord {
  std::string id;
  size_t n = 0;  // pool size the selection was made over
  SelectionResult result;

  bool operator==(const SelectionRecord&) const = default;
};

// {"id", "strategy", "solver", "lambda", "k", "n", "indices", "f_rep",
//  "f_div", "objective", "seed", "config_hash"} per line.
void write_selections(std::span<const SelectionRecord> records, const std::filesystem::path& path,
                      const std::string& config_hash, uint64_t seed);
std::vector<SelectionRecord> load_selections(const std::filesystem::path& path);

// Pools (truncated to --n-cap) with aligned embeddings and score tables.
struct Corpus {
  std::vector<CandidatePool> pools;
  EmbeddingMap embeddings;
  ScoreMap rewards;
  ScoreMap perplexities;

  const CandidatePool& pool(const std::string& id) const;
};

Corpus load_corpus(const RunConfig& config);

// Runs fn(i) for i in [0, count) on up to `limit` threads. The first
// failure by index is rethrown after all workers finish.
void parallel_for(size_t count, size_t limit, const std::function<void(size_t)>& fn);

// The distance matrix for one pool, or nullopt when the configured distance
// has no data (cosine without embeddings).
std::optional<DistanceMatrix> pool_matrix(const RunConfig& config, const Corpus& corpus, const CandidatePool& pool);

std::vector<SelectionRecord> select_corpus(const RunConfig& config, const Corpus& corpus);

struct LedgerSummary {
  std::string judge;
  std::string config_hash;
  size_t selected_instructions = 0;
  size_t annotated_instructions = 0;
  size_t pending_instructions = 0;
  std::vector<std::string> failed_ids;
  size_t planned_instructions = 0;
  size_t planned_annotations = 0;
  size_t consumed_annotations = 0;
  std::string finished_at;  // the only wall-clock value in any output

  std::string to_json() const;
};

struct AnnotateOutcome {
  std::vector<PreferencePair> pairs;
  LedgerSummary summary;
};

AnnotateOutcome annotate_corpus(const RunConfig& config, const Corpus& corpus,
                                std::span<const SelectionRecord> selections);

std::vector<InstructionMetrics> measure_corpus(const RunConfig& config, const Corpus& corpus,
                                               std::span<const SelectionRecord> selections,
                                               std::span<const PreferencePair> pairs);

// `select`: writes the selection file to config.output.
std::vector<SelectionRecord> run_select(const RunConfig& config);

// `annotate`: reads config.selections[0]; writes preferences to config.output
// (table / remote judges) or queues tasks in config.journal (human judge).
LedgerSummary run_annotate(const RunConfig& config);

// `metrics`: one report over every selection file, with distinct-n taken
// from the positionally matching preference files when given.
DatasetReport run_metrics(const RunConfig& config);

struct PipelineOutcome {
  std::vector<std::filesystem::path> selection_files;
  std::vector<std::filesystem::path> preference_files;
  std::filesystem::path report_file;
  DatasetReport report;
  std::vector<LedgerSummary> summaries;  // one per lambda
};

// `pipeline`: select -> annotate -> report, once per lambda.
PipelineOutcome run_pipeline(const RunConfig& config);

// "prefs.jsonl" + ".lambda-0.5" -> "prefs.lambda-0.5.jsonl".
std::filesystem::path with_tag(const std::filesystem::path& path, const std::string& tag);

}  // namespace aepo
