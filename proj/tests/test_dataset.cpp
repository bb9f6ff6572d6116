#include "dataset.hpp"

#include <cmath>
#include <limits>

#include "doctest.h"
#include "error.hpp"
#include "support.hpp"

using namespace aepo;
using testing::ScratchDir;
using testing::write_text;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an aepo::Error");
  return ErrorCode::kInvariant;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  FAIL("expected an aepo::Error");
  return {};
}

std::vector<CandidatePool> two_pools() {
  return {{{"a", "q1"}, {"r1", "r2"}}, {{"b", "q2"}, {"s1", "s2", "s1"}}};
}

}  // namespace

TEST_CASE("load_candidates reads a minimal record") {
  ScratchDir dir("dataset");
  write_text(dir / "c.jsonl", R"({"id":"a","instruction":"q","responses":["r1","r2"]})" "\n");
  const auto pools = load_candidates(dir / "c.jsonl");
  REQUIRE(pools.size() == 1);
  CHECK(pools[0].id() == "a");
  CHECK(pools[0].instruction.text == "q");
  CHECK(pools[0].size() == 2);
}

TEST_CASE("load_candidates rejects pools with fewer than two responses") {
  ScratchDir dir("dataset");
  write_text(dir / "c.jsonl", R"({"id":"a","instruction":"q","responses":["r1"]})" "\n");
  CHECK(code_of([&] { load_candidates(dir / "c.jsonl"); }) == ErrorCode::kValidation);
}

TEST_CASE("load_candidates names the line of a duplicate id") {
  ScratchDir dir("dataset");
  write_text(dir / "c.jsonl", R"({"id":"a","instruction":"q","responses":["r1","r2"]})" "\n"
                              R"({"id":"a","instruction":"q","responses":["r3","r4"]})" "\n");
  const auto msg = message_of([&] { load_candidates(dir / "c.jsonl"); });
  CHECK(msg.find(":2:") != std::string::npos);
  CHECK(msg.find("duplicate id \"a\"") != std::string::npos);
}

TEST_CASE("load_candidates skips blank lines but counts them") {
  ScratchDir dir("dataset");
  write_text(dir / "c.jsonl", "\n" R"({"id":"a","instruction":"q","responses":["r1","r2"]})" "\n\n{oops\n");
  const auto msg = message_of([&] { load_candidates(dir / "c.jsonl"); });
  CHECK(msg.find(":4:") != std::string::npos);
}

TEST_CASE("load_candidates reports missing fields with the line") {
  ScratchDir dir("dataset");
  write_text(dir / "c.jsonl", R"({"id":"a","responses":["r1","r2"]})" "\n");
  const auto msg = message_of([&] { load_candidates(dir / "c.jsonl"); });
  CHECK(msg.find(":1:") != std::string::npos);
  CHECK(msg.find("instruction") != std::string::npos);
}

TEST_CASE("duplicate response strings stay distinct") {
  ScratchDir dir("dataset");
  const auto pools = two_pools();
  write_candidates(pools, dir / "c.jsonl");
  const auto loaded = load_candidates(dir / "c.jsonl");
  CHECK(loaded == pools);
  CHECK(loaded[1].size() == 3);
}

TEST_CASE("embeddings: aligned sets load; count, dimension and norm are checked") {
  ScratchDir dir("dataset");
  const std::vector<CandidatePool> pools = {{{"a", "q"}, {"r1", "r2"}}};

  write_text(dir / "ok.jsonl", R"({"id":"a","vectors":[[1,0,0],[0,1,0]]})" "\n");
  const auto ok = load_embeddings(dir / "ok.jsonl", pools);
  CHECK(ok.at("a").dimension() == 3);

  write_text(dir / "count.jsonl", R"({"id":"a","vectors":[[1,0,0]]})" "\n");
  CHECK(code_of([&] { load_embeddings(dir / "count.jsonl", pools); }) == ErrorCode::kAlignment);

  write_text(dir / "zero.jsonl", R"({"id":"a","vectors":[[1,0,0],[0,0,0]]})" "\n");
  CHECK(code_of([&] { load_embeddings(dir / "zero.jsonl", pools); }) == ErrorCode::kValidation);

  write_text(dir / "ragged.jsonl", R"({"id":"a","vectors":[[1,0,0],[0,1]]})" "\n");
  CHECK(code_of([&] { load_embeddings(dir / "ragged.jsonl", pools); }) == ErrorCode::kAlignment);

  write_text(dir / "unknown.jsonl", R"({"id":"a","vectors":[[1,0],[0,1]]})" "\n"
                                    R"({"id":"zz","vectors":[[1,0],[0,1]]})" "\n");
  CHECK(code_of([&] { load_embeddings(dir / "unknown.jsonl", pools); }) == ErrorCode::kAlignment);

  write_text(dir / "missing.jsonl", "");
  CHECK(code_of([&] { load_embeddings(dir / "missing.jsonl", pools); }) == ErrorCode::kAlignment);
}

TEST_CASE("embeddings round-trip through the text form and the binary sidecar") {
  ScratchDir dir("dataset");
  const auto pools = two_pools();
  const std::vector<EmbeddingSet> sets = {{"a", {{0.1f, -2.5f}, {3.25f, 1e-7f}}},
                                          {"b", {{1.0f, 0.0f}, {0.3333333f, 0.5f}, {-1.0f, 7.0f}}}};
  for (auto format : {EmbeddingFormat::kText, EmbeddingFormat::kBinary}) {
    const auto path = dir / (format == EmbeddingFormat::kText ? "e.jsonl" : "e.bin");
    write_embeddings(sets, path, format);
    const auto loaded = load_embeddings(path, pools);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded.at("a") == sets[0]);
    CHECK(loaded.at("b") == sets[1]);
  }
  CHECK(testing::read_text(dir / "e.bin").starts_with("AEPV1\n"));
}

TEST_CASE("binary sidecar truncation is a parse error") {
  ScratchDir dir("dataset");
  const auto pools = two_pools();
  const std::vector<EmbeddingSet> sets = {{"a", {{1.0f, 2.0f}, {3.0f, 4.0f}}}, {"b", {{1, 0}, {0, 1}, {1, 1}}}};
  write_embeddings(sets, dir / "e.bin", EmbeddingFormat::kBinary);
  auto bytes = testing::read_text(dir / "e.bin");
  bytes.resize(bytes.size() - 3);
  write_text(dir / "e.bin", bytes);
  CHECK(code_of([&] { load_embeddings(dir / "e.bin", pools); }) == ErrorCode::kParse);
}

TEST_CASE("scores: table, non-finite and length mismatch") {
  ScratchDir dir("dataset");
  const std::vector<CandidatePool> pools = {{{"a", "q"}, {"r1", "r2"}}};

  write_text(dir / "ok.jsonl", R"({"id":"a","scores":[0.1,0.7]})" "\n");
  const auto ok = load_scores(dir / "ok.jsonl", pools, ScoreKind::kReward);
  CHECK(ok.at("a").scores == std::vector<double>{0.1, 0.7});
  CHECK(ok.at("a").kind == ScoreKind::kReward);

  write_text(dir / "nan.jsonl", R"({"id":"a","scores":[null,0.7]})" "\n");
  CHECK(code_of([&] { load_scores(dir / "nan.jsonl", pools, ScoreKind::kReward); }) == ErrorCode::kValidation);

  write_text(dir / "long.jsonl", R"({"id":"a","scores":[0.1,0.7,0.2]})" "\n");
  CHECK(code_of([&] { load_scores(dir / "long.jsonl", pools, ScoreKind::kReward); }) == ErrorCode::kAlignment);

  write_text(dir / "text.jsonl", R"({"id":"a","scores":["high",0.7]})" "\n");
  CHECK(code_of([&] { load_scores(dir / "text.jsonl", pools, ScoreKind::kReward); }) == ErrorCode::kParse);
}

TEST_CASE("scores round-trip") {
  ScratchDir dir("dataset");
  const auto pools = two_pools();
  const std::vector<ScoreTable> tables = {{"a", {0.1, -1e300}, ScoreKind::kPerplexity},
                                          {"b", {1.0 / 3.0, 2.5, 0.0}, ScoreKind::kPerplexity}};
  write_scores(tables, dir / "s.jsonl");
  const auto loaded = load_scores(dir / "s.jsonl", pools, ScoreKind::kPerplexity);
  CHECK(loaded.at("a") == tables[0]);
  CHECK(loaded.at("b") == tables[1]);
}

TEST_CASE("preferences: round-trip, empty list, and invalid pairs") {
  ScratchDir dir("dataset");
  const std::vector<PreferencePair> pairs = {
      {"a", "q1", "r2", "r1", 1, 0, "aepo", 0.5, 2},
      {"b", "q2 \"quoted\"\nnewline", "s1", "s1", 0, 2, "won", std::nullopt, 3},
  };
  write_preferences(pairs, dir / "p.jsonl");
  CHECK(load_preferences(dir / "p.jsonl") == pairs);

  write_preferences({}, dir / "empty.jsonl");
  CHECK(std::filesystem::file_size(dir / "empty.jsonl") == 0);
  CHECK(load_preferences(dir / "empty.jsonl").empty());

  std::vector<PreferencePair> bad = {{"c", "q", "x", "x", 1, 1, "aepo", 1.0, 2}};
  CHECK(code_of([&] { write_preferences(bad, dir / "bad.jsonl"); }) == ErrorCode::kInvariant);
  CHECK_FALSE(std::filesystem::exists(dir / "bad.jsonl"));
}

TEST_CASE("preference records carry null lambda for non-aepo strategies") {
  ScratchDir dir("dataset");
  const std::vector<PreferencePair> pairs = {{"b", "q", "s1", "s2", 0, 1, "random", std::nullopt, 2}};
  write_preferences(pairs, dir / "p.jsonl");
  CHECK(testing::read_text(dir / "p.jsonl").find("\"lambda\":null") != std::string::npos);
}

TEST_CASE("truncate keeps the first responses and aligned data") {
  const CandidatePool pool{{"a", "q"}, {"r0", "r1", "r2", "r3"}};
  const EmbeddingSet set{"a", {{1, 0}, {0, 1}, {1, 1}, {2, 1}}};
  const ScoreTable table{"a", {0.1, 0.2, 0.3, 0.4}, ScoreKind::kReward};
  CHECK(truncate(pool, 2).responses == std::vector<std::string>{"r0", "r1"});
  CHECK(truncate(set, 3).vectors.size() == 3);
  CHECK(truncate(table, 3).scores == std::vector<double>{0.1, 0.2, 0.3});
  CHECK(truncate(pool, 10) == pool);
}
