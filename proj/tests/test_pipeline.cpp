#include "pipeline.hpp"

#include <atomic>
#include <set>
#include <thread>

#include "corpus.hpp"
#include "doctest.h"
#include "error.hpp"
#include "httplib.h"
#include "json.hpp"
#include "session.hpp"
#include "support.hpp"

using namespace aepo;
using testing::ScratchDir;

namespace {

RunConfig base_config(const testing::CorpusFiles& f, const ScratchDir& dir) {
  RunConfig c;
  c.input = f.candidates;
  c.embeddings = f.embeddings;
  c.scores = f.scores;
  c.output = dir / "prefs.jsonl";
  c.seed = 11;
  return c;
}

size_t line_count(const std::filesystem::path& p) {
  const auto text = testing::read_text(p);
  return static_cast<size_t>(std::count(text.begin(), text.end(), '\n'));
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "no error";
}

}  // namespace

TEST_CASE("run_select writes one record per instruction") {
  ScratchDir dir("pipeline");
  const auto corpus = testing::make_corpus({.instructions = 3, .n = 128});
  const auto files = testing::write_corpus(corpus, dir.path());
  auto config = base_config(files, dir);
  config.output = dir / "sel.jsonl";
  const auto records = run_select(config);
  REQUIRE(records.size() == 3);
  std::istringstream lines(testing::read_text(config.output));
  std::string line;
  size_t count = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"id", "indices", "f_rep", "f_div", "objective", "config_hash", "seed"}) CHECK(j.contains(key));
    CHECK(j["indices"].size() == 2);
    CHECK(j["solver"] == "exact");
    CHECK(j["n"] == 128);
    ++count;
  }
  CHECK(count == 3);
  CHECK(load_selections(config.output) == records);
}

TEST_CASE("west-of-n selection lists every response; n-cap truncates pools") {
  ScratchDir dir("pipeline");
  const auto files = testing::write_corpus(testing::make_corpus({.instructions = 4, .n = 32}), dir.path());
  auto config = base_config(files, dir);
  config.output = dir / "sel.jsonl";
  config.strategy = StrategyKind::kWon;
  config.budget = BudgetMode::kUnconstrained;
  config.n_cap = 8;
  for (const auto& r : run_select(config)) CHECK(r.result.indices == std::vector<size_t>{0, 1, 2, 3, 4, 5, 6, 7});

  config.strategy = StrategyKind::kAepo;
  config.n_cap = 16;
  for (const auto& r : run_select(config)) {
    CHECK(r.n == 16);
    for (size_t i : r.result.indices) CHECK(i < 16);
  }
}

TEST_CASE("budget-matched west-of-n with N=128 on 640 instructions uses 10") {
  ScratchDir dir("pipeline");
  auto corpus = testing::make_corpus({.instructions = 640, .n = 128, .dim = 2});
  write_candidates(corpus.pools, dir / "c.jsonl");
  RunConfig config;
  config.input = dir / "c.jsonl";
  config.output = dir / "sel.jsonl";
  config.strategy = StrategyKind::kWon;
  const auto records = run_select(config);
  CHECK(records.size() == 10);
  std::set<std::string> ids;
  for (const auto& r : records) {
    ids.insert(r.id);
    CHECK(r.result.indices.size() == 128);
  }
  CHECK(ids.size() == 10);
}

TEST_CASE("pipeline on a toy corpus: ten pairs and one report row") {
  ScratchDir dir("pipeline");
  const auto files = testing::write_corpus(testing::make_corpus({.instructions = 10, .n = 8}), dir.path());
  const auto config = base_config(files, dir);
  const auto outcome = run_pipeline(config);
  CHECK(line_count(config.output) == 10);
  CHECK(outcome.report.rows.size() == 1);
  CHECK(outcome.report.rows[0].instructions == 10);
  CHECK(std::filesystem::exists(outcome.selection_files[0]));
  CHECK(std::filesystem::exists(outcome.report_file));
  CHECK(std::filesystem::exists(outcome.report_file.string() + ".jsonl"));
  REQUIRE(outcome.summaries.size() == 1);
  CHECK(outcome.summaries[0].consumed_annotations == outcome.summaries[0].planned_annotations);
  CHECK(outcome.summaries[0].consumed_annotations == 20);
}

TEST_CASE("lambda sweep writes four preference files and four report rows") {
  ScratchDir dir("pipeline");
  const auto files = testing::write_corpus(testing::make_corpus({.instructions = 5, .n = 8}), dir.path());
  auto config = base_config(files, dir);
  config.lambda_sweep = true;
  const auto outcome = run_pipeline(config);
  REQUIRE(outcome.preference_files.size() == 4);
  std::set<std::string> names;
  for (const auto& p : outcome.preference_files) {
    names.insert(p.filename().string());
    CHECK(line_count(p) == 5);
  }
  CHECK(names.size() == 4);
  CHECK(names.count("prefs.lambda-0.5.jsonl") == 1);
  REQUIRE(outcome.report.rows.size() == 4);
  for (size_t i = 0; i < 4; ++i) CHECK(outcome.report.rows[i].key.lambda == kDefaultLambdaSweep[i]);
}

TEST_CASE("identical config and seed produce byte-identical outputs") {
  ScratchDir dir("pipeline");
  const auto files = testing::write_corpus(testing::make_corpus({.instructions = 12, .n = 16}), dir.path());
  for (auto strategy : {StrategyKind::kAepo, StrategyKind::kRandom, StrategyKind::kWon, StrategyKind::kCoreset}) {
    std::vector<std::string> sel, prefs;
    for (size_t threads : {1u, 4u}) {
      auto config = base_config(files, dir);
      config.strategy = strategy;
      config.budget = BudgetMode::kMatched;
      config.concurrency = threads;
      config.output = dir / ("p" + std::to_string(threads) + ".jsonl");
      const auto outcome = run_pipeline(config);
      sel.push_back(testing::read_text(outcome.selection_files[0]));
      prefs.push_back(testing::read_text(outcome.preference_files[0]));
    }
    CHECK(sel[0] == sel[1]);
    CHECK(prefs[0] == prefs[1]);
    CHECK_FALSE(sel[0].empty());
  }
}

TEST_CASE("random selections depend on the seed") {
  ScratchDir dir("pipeline");
  const auto files = testing::write_corpus(testing::make_corpus({.instructions = 6, .n = 32}), dir.path());
  auto config = base_config(files, dir);
  config.strategy = StrategyKind::kRandom;
  config.output = dir / "a.jsonl";
  const auto a = run_select(config);
  config.seed = 12;
  const auto b = run_select(config);
  CHECK(a != b);
}

TEST_CASE("annotate honours a hand-edited selection file") {
  ScratchDir dir("pipeline");
  const auto corpus = testing::make_corpus({.instructions = 3, .n = 6});
  const auto files = testing::write_corpus(corpus, dir.path());
  auto config = base_config(files, dir);
  config.output = dir / "sel.jsonl";
  auto records = run_select(config);
  records[1].result.indices = {4, 5, 0};
  records[1].result.f_rep.reset();
  write_selections(records, dir / "edited.jsonl", "hand", 0);

  config.selections = {dir / "edited.jsonl"};
  config.output = dir / "prefs.jsonl";
  const auto summary = run_annotate(config);
  const auto pairs = load_preferences(config.output);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[1].annotations_used == 3);
  CHECK(std::set<size_t>{4, 5, 0}.count(pairs[1].chosen_index) == 1);
  CHECK(summary.consumed_annotations == 7);
}

TEST_CASE("remote judge: failed instructions are dropped and not charged") {
  ScratchDir dir("pipeline");
  const auto corpus = testing::make_corpus({.instructions = 6, .n = 6});
  const auto files = testing::write_corpus(corpus, dir.path());
  httplib::Server server;
  server.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const std::string instruction = body["instruction"];
    if (instruction == corpus.pools[1].instruction.text || instruction == corpus.pools[4].instruction.text) {
      res.status = 503;
      return;
    }
    res.set_content(nlohmann::json{{"score", static_cast<double>(body["response"].get<std::string>().size())}}.dump(),
                    "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  auto config = base_config(files, dir);
  config.output = dir / "sel.jsonl";
  run_select(config);
  config.selections = {dir / "sel.jsonl"};
  config.output = dir / "prefs.jsonl";
  config.scores.clear();
  config.scorer_url = "http://127.0.0.1:" + std::to_string(port);
  config.timeout_ms = 2000;
  const auto summary = run_annotate(config);
  server.stop();
  th.join();

  CHECK(summary.judge == "remote");
  CHECK(summary.failed_ids == std::vector<std::string>{"q1", "q4"});
  CHECK(summary.annotated_instructions == 4);
  CHECK(summary.planned_annotations - summary.consumed_annotations == 2 * 2);
  CHECK(line_count(config.output) == 4);
}

TEST_CASE("human judge journals pending tasks and resumes") {
  ScratchDir dir("pipeline");
  const auto files = testing::write_corpus(testing::make_corpus({.instructions = 4, .n = 6}), dir.path());
  auto config = base_config(files, dir);
  config.output = dir / "sel.jsonl";
  run_select(config);
  config.selections = {dir / "sel.jsonl"};
  config.output.clear();
  config.scores.clear();
  config.journal = dir / "journal.jsonl";
  auto summary = run_annotate(config);
  CHECK(summary.judge == "human");
  CHECK(summary.pending_instructions == 4);
  {
    AnnotationSession session(config.journal, config.seed);
    session.apply_judgment("q2", 0, 1);
  }
  summary = run_annotate(config);  // re-running does not duplicate tasks
  CHECK(summary.pending_instructions == 3);
  CHECK(summary.annotated_instructions == 1);
  CHECK(summary.consumed_annotations == 2);
}

TEST_CASE("pipeline errors name the failing stage") {
  ScratchDir dir("pipeline");
  RunConfig config;
  config.input = dir / "missing.jsonl";
  config.output = dir / "prefs.jsonl";
  config.scores = dir / "missing-scores.jsonl";
  CHECK(error_of([&] { run_pipeline(config); }).starts_with("load: "));

  const auto files = testing::write_corpus(testing::make_corpus({.instructions = 2, .n = 4}), dir.path());
  config = base_config(files, dir);
  config.embeddings.clear();
  CHECK(error_of([&] { run_pipeline(config); }).starts_with("select: "));
  CHECK_FALSE(std::filesystem::exists(config.output));
}

TEST_CASE("metrics over several selection files") {
  ScratchDir dir("pipeline");
  const auto files = testing::write_corpus(testing::make_corpus({.instructions = 5, .n = 8}), dir.path());
  auto config = base_config(files, dir);
  for (auto s : {StrategyKind::kAepo, StrategyKind::kRandom}) {
    config.strategy = s;
    config.output = dir / (std::string(to_string(s)) + ".sel.jsonl");
    run_select(config);
    config.selections.push_back(config.output);
  }
  config.report = dir / "report.txt";
  const auto report = run_metrics(config);
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].key.strategy == "aepo");
  CHECK(report.rows[1].key.strategy == "random");
  CHECK_FALSE(report.rows[1].key.lambda.has_value());
  CHECK(std::filesystem::exists(config.report));
}

TEST_CASE("binary embeddings work end to end") {
  ScratchDir dir("pipeline");
  const auto files =
      testing::write_corpus(testing::make_corpus({.instructions = 3, .n = 6}), dir.path(), EmbeddingFormat::kBinary);
  const auto config = base_config(files, dir);
  CHECK(run_pipeline(config).report.rows.size() == 1);
}

TEST_CASE("parallel_for rethrows the first failure by index") {
  std::atomic<int> ran{0};
  try {
    parallel_for(100, 8, [&](size_t i) {
      ++ran;
      if (i == 40 || i == 70) throw Error(ErrorCode::kIo, std::to_string(i));
    });
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()) == "40");
  }
  CHECK(ran == 100);
}

TEST_CASE("with_tag inserts before the extension") {
  CHECK(with_tag("out/prefs.jsonl", ".lambda-0.5") == std::filesystem::path("out/prefs.lambda-0.5.jsonl"));
  CHECK(with_tag("prefs", ".x") == std::filesystem::path("prefs.x"));
}
