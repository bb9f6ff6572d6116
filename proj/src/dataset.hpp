// SPDX-License-Identifier: Apache-2.0
//
// Corpus data model and line-record file I/O. Every loader validates
// alignment against the candidate pools before returning; nothing is
// silently truncated or padded.
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aepo {

struct Instruction {
  std::string id;
  std::string text;

  bool operator==(const Instruction&) const = default;
};

// Response position is the response identity. Duplicate strings are legal
// and stay distinct.
struct CandidatePool {
  Instruction instruction;
  std::vector<std::string> responses;

  size_t size() const { return responses.size(); }
  const std::string& id() const { return instruction.id; }

  bool operator==(const CandidatePool&) const = default;
};

struct EmbeddingSet {
  std::string id;
  std::vector<std::vector<float>> vectors;

  size_t dimension() const { return vectors.empty() ? 0 : vectors.front().size(); }

  bool operator==(const EmbeddingSet&) const = default;
};

enum class ScoreKind { kReward, kPerplexity };

const char* to_string(ScoreKind kind);

struct ScoreTable {
  std::string id;
  std::vector<double> scores;
  ScoreKind kind = ScoreKind::kReward;

  bool operator==(const ScoreTable&) const = default;
};

struct PreferencePair {
  std::string id;
  std::string instruction;
  std::string chosen;
  std::string rejected;
  size_t chosen_index = 0;
  size_t rejected_index = 0;
  std::string strategy;
  std::optional<double> lambda;
  size_t annotations_used = 0;

  bool operator==(const PreferencePair&) const = default;
};

using EmbeddingMap = std::map<std::string, EmbeddingSet>;
using ScoreMap = std::map<std::string, ScoreTable>;

enum class EmbeddingFormat { kText, kBinary };

// Candidates: {"id", "instruction", "responses": [...]} per line.
std::vector<CandidatePool> load_candidates(const std::filesystem::path& path);
void write_candidates(std::span<const CandidatePool> pools, const std::filesystem::path& path);

// Accepts either the text form or the binary sidecar; the sidecar is
// recognised by its magic header.
EmbeddingMap load_embeddings(const std::filesystem::path& path,
                             std::span<const CandidatePool> pools);
void write_embeddings(std::span<const EmbeddingSet> sets, const std::filesystem::path& path,
                      EmbeddingFormat format = EmbeddingFormat::kText);

ScoreMap load_scores(const std::filesystem::path& path, std::span<const CandidatePool> pools,
                     ScoreKind kind);
void write_scores(std::span<const ScoreTable> tables, const std::filesystem::path& path);

// Throws kInvariant for chosen_index == rejected_index.
void validate_pair(const PreferencePair& pair);
void write_preferences(std::span<const PreferencePair> pairs, const std::filesystem::path& path);
std::vector<PreferencePair> load_preferences(const std::filesystem::path& path);

// Alignment checks used by the loaders; exposed for callers that build
// these objects in memory.
void check_alignment(const CandidatePool& pool, const EmbeddingSet& set);
void check_alignment(const CandidatePool& pool, const ScoreTable& table);

// Keeps the first `cap` responses (and aligned vectors / scores).
CandidatePool truncate(const CandidatePool& pool, size_t cap);
EmbeddingSet truncate(const EmbeddingSet& set, size_t cap);
ScoreTable truncate(const ScoreTable& table, size_t cap);

}  // namespace aepo
