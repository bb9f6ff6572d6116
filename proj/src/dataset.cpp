// SPDX-License-Identifier: Apache-2.0
#include "dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "error.hpp"
#include "json.hpp"

namespace aepo {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr std::string_view kSidecarMagic = "AEPV1\n";

std::string where(const std::filesystem::path& path, size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

// Calls fn(line_number, parsed_object) for every nonblank line.
void for_each_record(const std::filesystem::path& path,
                     const std::function<void(size_t, const json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParse, where(path, line_no) + "malformed record: " + e.what());
    }
    if (!record.is_object()) {
      throw Error(ErrorCode::kParse, where(path, line_no) + "record is not an object");
    }
    try {
      fn(line_no, record);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, where(path, line_no) + "malformed record: " + e.what());
    } catch (const Error& e) {
      const std::string prefix = where(path, line_no);
      if (std::string_view(e.what()).starts_with(path.string())) throw;
      throw Error(e.code(), prefix + e.what());
    }
  }
}

const json& require(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end()) throw Error(ErrorCode::kParse, std::string("missing field \"") + key + "\"");
  return *it;
}

std::string require_string(const json& record, const char* key) {
  const json& v = require(record, key);
  if (!v.is_string()) throw Error(ErrorCode::kParse, std::string("field \"") + key + "\" must be a string");
  return v.get<std::string>();
}

double require_finite(const json& v, const char* what) {
  if (!v.is_number()) throw Error(ErrorCode::kParse, std::string(what) + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw Error(ErrorCode::kValidation, std::string(what) + " is not finite");
  return x;
}

std::ofstream open_for_write(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::map<std::string, const CandidatePool*> index_pools(std::span<const CandidatePool> pools) {
  std::map<std::string, const CandidatePool*> by_id;
  for (const auto& pool : pools) by_id.emplace(pool.id(), &pool);
  return by_id;
}

template <typename Map>
void require_all_present(const Map& loaded, std::span<const CandidatePool> pools,
                         const std::filesystem::path& path) {
  for (const auto& pool : pools) {
    if (!loaded.contains(pool.id())) {
      throw Error(ErrorCode::kAlignment, path.string() + ": missing id \"" + pool.id() + "\"");
    }
  }
}

// Binary sidecar helpers. All integers and floats are little-endian.
void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class ByteReader {
 public:
  ByteReader(std::string data, std::filesystem::path path)
      : data_(std::move(data)), path_(std::move(path)) {}

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  float f32() {
    const uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, sizeof f);
    return f;
  }

  std::string bytes(size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  void need(size_t n) const {
    if (data_.size() - pos_ < n) {
      throw Error(ErrorCode::kParse, path_.string() + ": truncated embedding sidecar at byte " + std::to_string(pos_));
    }
  }

  std::string data_;
  std::filesystem::path path_;
  size_t pos_ = 0;
};

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<EmbeddingSet> read_binary_embeddings(const std::filesystem::path& path, std::string data) {
  ByteReader reader(std::move(data), path);
  reader.bytes(kSidecarMagic.size());
  const uint32_t records = reader.u32();
  std::vector<EmbeddingSet> sets;
  sets.reserve(records);
  for (uint32_t r = 0; r < records; ++r) {
    EmbeddingSet set;
    set.id = reader.bytes(reader.u32());
    const uint32_t count = reader.u32();
    const uint32_t dim = reader.u32();
    set.vectors.assign(count, std::vector<float>(dim));
    for (auto& v : set.vectors) {
      for (auto& x : v) x = reader.f32();
    }
    sets.push_back(std::move(set));
  }
  if (!reader.done()) throw Error(ErrorCode::kParse, path.string() + ": trailing bytes after last record");
  return sets;
}

std::vector<EmbeddingSet> read_text_embeddings(const std::filesystem::path& path) {
  std::vector<EmbeddingSet> sets;
  for_each_record(path, [&](size_t line_no, const json& record) {
    EmbeddingSet set;
    set.id = require_string(record, "id");
    const json& vectors = require(record, "vectors");
    if (!vectors.is_array()) throw Error(ErrorCode::kParse, where(path, line_no) + "\"vectors\" must be an array");
    for (const auto& v : vectors) {
      if (!v.is_array()) throw Error(ErrorCode::kParse, where(path, line_no) + "each vector must be an array");
      std::vector<float> vec;
      vec.reserve(v.size());
      for (const auto& x : v) vec.push_back(static_cast<float>(require_finite(x, "embedding component")));
      set.vectors.push_back(std::move(vec));
    }
    sets.push_back(std::move(set));
  });
  return sets;
}

}  // namespace

const char* to_string(ScoreKind kind) {
  return kind == ScoreKind::kReward ? "reward" : "perplexity";
}

std::vector<CandidatePool> load_candidates(const std::filesystem::path& path) {
  std::vector<CandidatePool> pools;
  std::map<std::string, size_t> first_seen;
  for_each_record(path, [&](size_t line_no, const json& record) {
    CandidatePool pool;
    pool.instruction.id = require_string(record, "id");
    pool.instruction.text = require_string(record, "instruction");
    if (pool.instruction.id.empty()) throw Error(ErrorCode::kValidation, where(path, line_no) + "empty id");
    const json& responses = require(record, "responses");
    if (!responses.is_array()) throw Error(ErrorCode::kParse, where(path, line_no) + "\"responses\" must be an array");
    for (const auto& r : responses) {
      if (!r.is_string()) throw Error(ErrorCode::kParse, where(path, line_no) + "responses must be strings");
      pool.responses.push_back(r.get<std::string>());
    }
    if (pool.size() < 2) {
      throw Error(ErrorCode::kValidation, where(path, line_no) + "pool \"" + pool.id() + "\" has N=" +
                                              std::to_string(pool.size()) + " < 2 responses");
    }
    auto [it, inserted] = first_seen.emplace(pool.id(), line_no);
    if (!inserted) {
      throw Error(ErrorCode::kValidation, where(path, line_no) + "duplicate id \"" + pool.id() +
                                              "\" (first seen on line " + std::to_string(it->second) + ")");
    }
    pools.push_back(std::move(pool));
  });
  return pools;
}

void write_candidates(std::span<const CandidatePool> pools, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  for (const auto& pool : pools) {
    ordered_json record;
    record["id"] = pool.instruction.id;
    record["instruction"] = pool.instruction.text;
    record["responses"] = pool.responses;
    out << record.dump() << '\n';
  }
  finish_write(out, path);
}

void check_alignment(const CandidatePool& pool, const EmbeddingSet& set) {
  const std::string prefix = "embeddings for \"" + pool.id() + "\": ";
  if (set.vectors.size() != pool.size()) {
    throw Error(ErrorCode::kAlignment, prefix + "vector count " + std::to_string(set.vectors.size()) +
                                           " does not match pool size " + std::to_string(pool.size()));
  }
  const size_t dim = set.dimension();
  if (dim == 0) throw Error(ErrorCode::kAlignment, prefix + "dimension must be at least 1");
  for (size_t i = 0; i < set.vectors.size(); ++i) {
    const auto& v = set.vectors[i];
    if (v.size() != dim) {
      throw Error(ErrorCode::kAlignment, prefix + "vector " + std::to_string(i) + " has dimension " +
                                             std::to_string(v.size()) + ", expected " + std::to_string(dim));
    }
    double norm2 = 0.0;
    for (float x : v) {
      if (!std::isfinite(x)) throw Error(ErrorCode::kValidation, prefix + "vector " + std::to_string(i) + " is not finite");
      norm2 += static_cast<double>(x) * x;
    }
    if (norm2 == 0.0) throw Error(ErrorCode::kValidation, prefix + "vector " + std::to_string(i) + " has zero norm");
  }
}

void check_alignment(const CandidatePool& pool, const ScoreTable& table) {
  const std::string prefix = std::string(to_string(table.kind)) + " scores for \"" + pool.id() + "\": ";
  if (table.scores.size() != pool.size()) {
    throw Error(ErrorCode::kAlignment, prefix + "score count " + std::to_string(table.scores.size()) +
                                           " does not match pool size " + std::to_string(pool.size()));
  }
  for (size_t i = 0; i < table.scores.size(); ++i) {
    if (!std::isfinite(table.scores[i])) {
      throw Error(ErrorCode::kValidation, prefix + "score " + std::to_string(i) + " is not finite");
    }
  }
}

EmbeddingMap load_embeddings(const std::filesystem::path& path, std::span<const CandidatePool> pools) {
  std::string data = slurp(path);
  std::vector<EmbeddingSet> sets = data.starts_with(kSidecarMagic)
                                       ? read_binary_embeddings(path, std::move(data))
                                       : read_text_embeddings(path);
  const auto by_id = index_pools(pools);
  EmbeddingMap result;
  for (auto& set : sets) {
    auto pool = by_id.find(set.id);
    if (pool == by_id.end()) throw Error(ErrorCode::kAlignment, path.string() + ": unknown id \"" + set.id + "\"");
    check_alignment(*pool->second, set);
    const std::string id = set.id;
    if (!result.emplace(id, std::move(set)).second) {
      throw Error(ErrorCode::kValidation, path.string() + ": duplicate id \"" + id + "\"");
    }
  }
  require_all_present(result, pools, path);
  return result;
}

void write_embeddings(std::span<const EmbeddingSet> sets, const std::filesystem::path& path,
                      EmbeddingFormat format) {
  if (format == EmbeddingFormat::kText) {
    auto out = open_for_write(path);
    for (const auto& set : sets) {
      ordered_json record;
      record["id"] = set.id;
      record["vectors"] = set.vectors;
      out << record.dump() << '\n';
    }
    finish_write(out, path);
    return;
  }
  std::string buf(kSidecarMagic);
  put_u32(buf, static_cast<uint32_t>(sets.size()));
  for (const auto& set : sets) {
    put_u32(buf, static_cast<uint32_t>(set.id.size()));
    buf += set.id;
    put_u32(buf, static_cast<uint32_t>(set.vectors.size()));
    put_u32(buf, static_cast<uint32_t>(set.dimension()));
    for (const auto& v : set.vectors) {
      if (v.size() != set.dimension()) {
        throw Error(ErrorCode::kAlignment, "embeddings for \"" + set.id + "\" have ragged dimensions");
      }
      for (float x : v) {
        uint32_t bits;
        std::memcpy(&bits, &x, sizeof bits);
        put_u32(buf, bits);
      }
    }
  }
  auto out = open_for_write(path, std::ios::out | std::ios::binary);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  finish_write(out, path);
}

ScoreMap load_scores(const std::filesystem::path& path, std::span<const CandidatePool> pools, ScoreKind kind) {
  const auto by_id = index_pools(pools);
  ScoreMap result;
  for_each_record(path, [&](size_t line_no, const json& record) {
    ScoreTable table;
    table.kind = kind;
    table.id = require_string(record, "id");
    const json& scores = require(record, "scores");
    if (!scores.is_array()) throw Error(ErrorCode::kParse, where(path, line_no) + "\"scores\" must be an array");
    for (const auto& s : scores) {
      if (s.is_null()) throw Error(ErrorCode::kValidation, where(path, line_no) + "score is not finite");
      table.scores.push_back(require_finite(s, "score"));
    }
    auto pool = by_id.find(table.id);
    if (pool == by_id.end()) throw Error(ErrorCode::kAlignment, where(path, line_no) + "unknown id \"" + table.id + "\"");
    check_alignment(*pool->second, table);
    const std::string id = table.id;
    if (!result.emplace(id, std::move(table)).second) {
      throw Error(ErrorCode::kValidation, where(path, line_no) + "duplicate id \"" + id + "\"");
    }
  });
  require_all_present(result, pools, path);
  return result;
}

void write_scores(std::span<const ScoreTable> tables, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  for (const auto& table : tables) {
    ordered_json record;
    record["id"] = table.id;
    record["scores"] = table.scores;
    out << record.dump() << '\n';
  }
  finish_write(out, path);
}

void validate_pair(const PreferencePair& pair) {
  if (pair.chosen_index == pair.rejected_index) {
    throw Error(ErrorCode::kInvariant, "preference pair \"" + pair.id + "\" has chosen_index == rejected_index (" +
                                           std::to_string(pair.chosen_index) + ")");
  }
}

void write_preferences(std::span<const PreferencePair> pairs, const std::filesystem::path& path) {
  for (const auto& pair : pairs) validate_pair(pair);
  auto out = open_for_write(path);
  for (const auto& pair : pairs) {
    ordered_json record;
    record["id"] = pair.id;
    record["instruction"] = pair.instruction;
    record["chosen"] = pair.chosen;
    record["rejected"] = pair.rejected;
    record["chosen_index"] = pair.chosen_index;
    record["rejected_index"] = pair.rejected_index;
    record["strategy"] = pair.strategy;
    record["lambda"] = pair.lambda ? ordered_json(*pair.lambda) : ordered_json(nullptr);
    record["annotations_used"] = pair.annotations_used;
    out << record.dump() << '\n';
  }
  finish_write(out, path);
}

std::vector<PreferencePair> load_preferences(const std::filesystem::path& path) {
  std::vector<PreferencePair> pairs;
  for_each_record(path, [&](size_t line_no, const json& record) {
    PreferencePair pair;
    pair.id = require_string(record, "id");
    pair.instruction = require_string(record, "instruction");
    pair.chosen = require_string(record, "chosen");
    pair.rejected = require_string(record, "rejected");
    pair.chosen_index = require(record, "chosen_index").get<size_t>();
    pair.rejected_index = require(record, "rejected_index").get<size_t>();
    pair.strategy = require_string(record, "strategy");
    const json& lambda = require(record, "lambda");
    if (!lambda.is_null()) pair.lambda = require_finite(lambda, "lambda");
    pair.annotations_used = require(record, "annotations_used").get<size_t>();
    try {
      validate_pair(pair);
    } catch (const Error& e) {
      throw Error(e.code(), where(path, line_no) + e.what());
    }
    pairs.push_back(std::move(pair));
  });
  return pairs;
}

CandidatePool truncate(const CandidatePool& pool, size_t cap) {
  CandidatePool out = pool;
  if (out.responses.size() > cap) out.responses.resize(cap);
  return out;
}

EmbeddingSet truncate(const EmbeddingSet& set, size_t cap) {
  EmbeddingSet out = set;
  if (out.vectors.size() > cap) out.vectors.resize(cap);
  return out;
}

ScoreTable truncate(const ScoreTable& table, size_t cap) {
  ScoreTable out = table;
  if (out.scores.size() > cap) out.scores.resize(cap);
  return out;
}

}  // namespace aepo
