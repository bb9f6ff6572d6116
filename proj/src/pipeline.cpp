// SPDX-License-Identifier: Apache-2.0
#include "pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "annotation.hpp"
#include "error.hpp"
#include "json.hpp"
#include "rng.hpp"
#include "session.hpp"

namespace aepo {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

ordered_json optional_json(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::optional<double> optional_real(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Re-raises an error with the failing stage's name in front.
template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), std::string(name) + ": " + e.what());
  }
}

void require_path(const std::filesystem::path& path, const char* flag) {
  if (path.empty()) throw Error(ErrorCode::kInvalidArgument, std::string("--") + flag + " is required");
}

size_t largest_pool(const Corpus& corpus) {
  size_t n = 0;
  for (const auto& pool : corpus.pools) n = std::max(n, pool.size());
  return n;
}

JudgeKind resolve_judge(const RunConfig& config) {
  if (config.judge != JudgeKind::kAuto) return config.judge;
  if (!config.scorer_url.empty()) return JudgeKind::kRemote;
  if (!config.scores.empty()) return JudgeKind::kTable;
  if (!config.journal.empty()) return JudgeKind::kHuman;
  throw Error(ErrorCode::kInvalidArgument, "no judgment source: give --scores, --scorer-url or --journal");
}

std::string lambda_tag(double lambda) {
  return ".lambda-" + json(lambda).dump();
}

}  // namespace

void write_selections(std::span<const SelectionRecord> records, const std::filesystem::path& path,
                      const std::string& config_hash, uint64_t seed) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& r : records) {
    ordered_json record;
    record["id"] = r.id;
    record["strategy"] = to_string(r.result.strategy);
    record["solver"] = to_string(r.result.solver);
    record["lambda"] = optional_json(r.result.lambda);
    record["k"] = r.result.indices.size();
    record["n"] = r.n;
    record["indices"] = r.result.indices;
    record["f_rep"] = optional_json(r.result.f_rep);
    record["f_div"] = optional_json(r.result.f_div);
    record["objective"] = optional_json(r.result.objective);
    record["seed"] = seed;
    record["config_hash"] = config_hash;
    out << record.dump() << '\n';
  }
  if (!out.flush()) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::vector<SelectionRecord> load_selections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<SelectionRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      json record = json::parse(line);
      SelectionRecord r;
      r.id = record.at("id").get<std::string>();
      r.result.indices = record.at("indices").get<std::vector<size_t>>();
      r.result.strategy = parse_strategy(record.at("strategy").get<std::string>());
      r.result.solver = record.contains("solver") ? parse_solver(record.at("solver").get<std::string>())
                                                   : SolverKind::kNotApplicable;
      r.result.lambda = optional_real(record, "lambda");
      r.result.f_rep = optional_real(record, "f_rep");
      r.result.f_div = optional_real(record, "f_div");
      r.result.objective = optional_real(record, "objective");
      r.n = record.at("n").get<size_t>();
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, where + "malformed selection record: " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
  }
  return records;
}

const CandidatePool& Corpus::pool(const std::string& id) const {
  auto it = std::find_if(pools.begin(), pools.end(), [&](const CandidatePool& p) { return p.id() == id; });
  if (it == pools.end()) throw Error(ErrorCode::kAlignment, "unknown instruction id \"" + id + "\"");
  return *it;
}

Corpus load_corpus(const RunConfig& config) {
  require_path(config.input, "input");
  Corpus corpus;
  corpus.pools = load_candidates(config.input);
  if (!config.embeddings.empty()) corpus.embeddings = load_embeddings(config.embeddings, corpus.pools);
  if (!config.scores.empty()) corpus.rewards = load_scores(config.scores, corpus.pools, ScoreKind::kReward);
  if (!config.perplexity.empty()) {
    corpus.perplexities = load_scores(config.perplexity, corpus.pools, ScoreKind::kPerplexity);
  }
  if (config.n_cap) {
    const size_t cap = *config.n_cap;
    for (auto& pool : corpus.pools) pool = truncate(pool, cap);
    for (auto& [id, set] : corpus.embeddings) set = truncate(set, cap);
    for (auto& [id, table] : corpus.rewards) table = truncate(table, cap);
    for (auto& [id, table] : corpus.perplexities) table = truncate(table, cap);
  }
  return corpus;
}

void parallel_for(size_t count, size_t limit, const std::function<void(size_t)>& fn) {
  const size_t workers = std::max<size_t>(1, std::min(limit, count));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<size_t> next{0};
  const auto work = [&] {
    for (size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (size_t w = 0; w < workers; ++w) threads.emplace_back(work);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::optional<DistanceMatrix> pool_matrix(const RunConfig& config, const Corpus& corpus, const CandidatePool& pool) {
  if (config.distance == DistanceKind::kNgram) {
    return build_distance_matrix(pool, DistanceKind::kNgram, nullptr, config.max_n);
  }
  auto it = corpus.embeddings.find(pool.id());
  if (it == corpus.embeddings.end()) return std::nullopt;
  if (it->second.vectors.size() == pool.size()) {
    return build_distance_matrix(pool, DistanceKind::kCosine, &it->second);
  }
  const EmbeddingSet trimmed = truncate(it->second, pool.size());
  return build_distance_matrix(pool, DistanceKind::kCosine, &trimmed);
}

std::vector<SelectionRecord> select_corpus(const RunConfig& config, const Corpus& corpus) {
  validate(config);
  const bool needs_matrix = config.strategy == StrategyKind::kAepo || config.strategy == StrategyKind::kCoreset;
  if (needs_matrix && config.distance == DistanceKind::kCosine && corpus.embeddings.empty()) {
    throw Error(ErrorCode::kInvalidArgument, std::string(to_string(config.strategy)) +
                                                 " with cosine distance needs --embeddings");
  }
  if (config.strategy == StrategyKind::kPerplexity && corpus.perplexities.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "the perplexity strategy needs --perplexity scores");
  }
  if (corpus.pools.empty()) return {};

  const BudgetPlan plan =
      budget_plan(config.strategy, largest_pool(corpus), config.k, corpus.pools.size(), config.budget);
  std::vector<size_t> used(corpus.pools.size());
  std::iota(used.begin(), used.end(), size_t{0});
  if (plan.instructions < used.size()) {
    // Seeded uniform subsample, kept in input order.
    std::mt19937_64 rng(mix_seed(config.seed, "instruction-subsample"));
    shuffle(used, rng);
    used.resize(plan.instructions);
    std::sort(used.begin(), used.end());
  }

  std::vector<SelectionRecord> records(used.size());
  parallel_for(used.size(), effective_concurrency(config), [&](size_t slot) {
    const CandidatePool& pool = corpus.pools[used[slot]];
    const auto matrix = pool_matrix(config, corpus, pool);
    SelectionResult result;
    switch (config.strategy) {
      case StrategyKind::kAepo: {
        SolverKind solver = config.solver.value_or(
            binomial(pool.size(), config.k) <= config.enumeration_cap ? SolverKind::kExact : SolverKind::kGreedy);
        result = solver == SolverKind::kExact ? select_exact(*matrix, config.k, config.lambda, config.enumeration_cap)
                                              : select_greedy(*matrix, config.k, config.lambda);
        break;
      }
      case StrategyKind::kRandom:
        result = select_random(pool.size(), config.k, mix_seed(config.seed, pool.id()));
        break;
      case StrategyKind::kWon:
        result = select_won(pool.size());
        break;
      case StrategyKind::kCoreset:
        result = select_coreset(*matrix, config.k);
        break;
      case StrategyKind::kPerplexity:
        result = select_perplexity_pair(corpus.perplexities.at(pool.id()));
        break;
    }
    if (matrix && config.strategy != StrategyKind::kAepo) attach_objectives(result, *matrix);
    records[slot] = SelectionRecord{pool.id(), pool.size(), std::move(result)};
  });
  return records;
}

std::string LedgerSummary::to_json() const {
  ordered_json record;
  record["judge"] = judge;
  record["selected_instructions"] = selected_instructions;
  record["annotated_instructions"] = annotated_instructions;
  record["pending_instructions"] = pending_instructions;
  record["failed_instructions"] = failed_ids.size();
  record["failed_ids"] = failed_ids;
  record["planned_instructions"] = planned_instructions;
  record["planned_annotations"] = planned_annotations;
  record["consumed_annotations"] = consumed_annotations;
  record["config_hash"] = config_hash;
  record["finished_at"] = finished_at;
  return record.dump();
}

AnnotateOutcome annotate_corpus(const RunConfig& config, const Corpus& corpus,
                                std::span<const SelectionRecord> selections) {
  const JudgeKind judge = resolve_judge(config);
  AnnotateOutcome outcome;
  LedgerSummary& summary = outcome.summary;
  summary.judge = to_string(judge);
  summary.config_hash = config_hash(config);
  summary.selected_instructions = selections.size();

  std::vector<const CandidatePool*> pools;
  for (const auto& record : selections) {
    const CandidatePool& pool = corpus.pool(record.id);
    validate_selection(record.result, pool);
    pools.push_back(&pool);
  }
  if (!selections.empty() && !corpus.pools.empty()) {
    const BudgetPlan plan = budget_plan(selections.front().result.strategy, largest_pool(corpus), config.k,
                                        corpus.pools.size(), config.budget);
    summary.planned_instructions = plan.instructions;
    summary.planned_annotations = plan.annotations;
  }
  BudgetLedger ledger(summary.planned_instructions, summary.planned_annotations);

  if (judge == JudgeKind::kHuman) {
    require_path(config.journal, "journal");
    AnnotationSession session(config.journal, config.seed);
    for (size_t i = 0; i < selections.size(); ++i) {
      if (!session.task(selections[i].id)) session.enqueue(selections[i].result, *pools[i]);
    }
    const SessionProgress progress = session.progress();
    summary.pending_instructions = progress.pending;
    summary.annotated_instructions = progress.done;
    summary.consumed_annotations = progress.consumed_annotations;
    outcome.pairs = session.pairs();
    summary.finished_at = utc_now();
    return outcome;
  }

  std::vector<std::optional<PreferencePair>> pairs(selections.size());
  std::vector<std::string> failures(selections.size());
  if (judge == JudgeKind::kTable) {
    if (corpus.rewards.empty()) throw Error(ErrorCode::kInvalidArgument, "the table judge needs --scores");
    parallel_for(selections.size(), effective_concurrency(config), [&](size_t i) {
      const auto& rewards = corpus.rewards.at(selections[i].id);
      pairs[i] = annotate_with_table(selections[i].result, *pools[i], rewards, ledger);
    });
  } else {
    if (config.scorer_url.empty()) throw Error(ErrorCode::kInvalidArgument, "the remote judge needs --scorer-url");
    RemoteScorerOptions options;
    options.url = config.scorer_url;
    options.timeout = std::chrono::milliseconds(config.timeout_ms);
    const RemoteScorer scorer(options);
    parallel_for(selections.size(), effective_concurrency(config), [&](size_t i) {
      try {
        pairs[i] = annotate_with_remote(selections[i].result, *pools[i], scorer, ledger);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kTransport && e.code() != ErrorCode::kValidation) throw;
        failures[i] = e.what();
      }
    });
  }
  for (size_t i = 0; i < selections.size(); ++i) {
    if (pairs[i]) {
      outcome.pairs.push_back(std::move(*pairs[i]));
    } else {
      summary.failed_ids.push_back(selections[i].id);
    }
  }
  summary.annotated_instructions = outcome.pairs.size();
  summary.consumed_annotations = ledger.consumed();
  summary.finished_at = utc_now();
  return outcome;
}

std::vector<InstructionMetrics> measure_corpus(const RunConfig& config, const Corpus& corpus,
                                               std::span<const SelectionRecord> selections,
                                               std::span<const PreferencePair> pairs) {
  std::map<std::string, const PreferencePair*> pair_by_id;
  for (const auto& p : pairs) pair_by_id.emplace(p.id, &p);
  std::vector<InstructionMetrics> out(selections.size());
  parallel_for(selections.size(), effective_concurrency(config), [&](size_t i) {
    const SelectionRecord& record = selections[i];
    const CandidatePool pool = truncate(corpus.pool(record.id), record.n);
    validate_selection(record.result, pool);
    const auto matrix = pool_matrix(config, corpus, pool);
    if (!matrix) throw Error(ErrorCode::kInvalidArgument, "metrics with cosine distance need --embeddings");
    std::optional<ScoreTable> rewards;
    if (auto it = corpus.rewards.find(record.id); it != corpus.rewards.end()) rewards = truncate(it->second, pool.size());
    auto pair = pair_by_id.find(record.id);
    GroupKey key{to_string(record.result.strategy), pool.size(), record.result.indices.size(), record.result.lambda};
    out[i] = measure_instruction(key, record.id, record.result.indices, *matrix,
                                 pair == pair_by_id.end() ? nullptr : pair->second,
                                 rewards ? &*rewards : nullptr);
  });
  return out;
}

std::vector<SelectionRecord> run_select(const RunConfig& config) {
  return stage("select", [&] {
    validate(config);
    require_path(config.output, "output");
    const Corpus corpus = load_corpus(config);
    auto records = select_corpus(config, corpus);
    write_selections(records, config.output, config_hash(config), config.seed);
    return records;
  });
}

LedgerSummary run_annotate(const RunConfig& config) {
  return stage("annotate", [&] {
    validate(config);
    if (config.selections.size() != 1) throw Error(ErrorCode::kInvalidArgument, "--selection takes exactly one file");
    const Corpus corpus = load_corpus(config);
    const auto records = load_selections(config.selections.front());
    if (resolve_judge(config) != JudgeKind::kHuman) require_path(config.output, "output");
    AnnotateOutcome outcome = annotate_corpus(config, corpus, records);
    if (!config.output.empty()) write_preferences(outcome.pairs, config.output);
    return outcome.summary;
  });
}

DatasetReport run_metrics(const RunConfig& config) {
  return stage("metrics", [&] {
    validate(config);
    if (config.selections.empty()) throw Error(ErrorCode::kInvalidArgument, "--selection is required");
    if (!config.preferences.empty() && config.preferences.size() != config.selections.size()) {
      throw Error(ErrorCode::kInvalidArgument, "give one --preferences file per --selection file, or none");
    }
    const Corpus corpus = load_corpus(config);
    std::vector<InstructionMetrics> all;
    for (size_t f = 0; f < config.selections.size(); ++f) {
      const auto records = load_selections(config.selections[f]);
      std::vector<PreferencePair> pairs;
      if (!config.preferences.empty()) pairs = load_preferences(config.preferences[f]);
      auto measured = measure_corpus(config, corpus, records, pairs);
      all.insert(all.end(), measured.begin(), measured.end());
    }
    DatasetReport report = dataset_report(all, to_string(config.distance), config_hash(config));
    if (!config.report.empty()) write_report(report, config.report);
    return report;
  });
}

std::filesystem::path with_tag(const std::filesystem::path& path, const std::string& tag) {
  std::filesystem::path out = path;
  out.replace_filename(path.stem().string() + tag + path.extension().string());
  return out;
}

PipelineOutcome run_pipeline(const RunConfig& config) {
  PipelineOutcome result;
  const Corpus corpus = stage("load", [&] {
    validate(config);
    require_path(config.output, "output");
    if (resolve_judge(config) == JudgeKind::kHuman) {
      throw Error(ErrorCode::kInvalidArgument, "pipeline needs a table or remote judge; use annotate + serve for humans");
    }
    if (config.lambda_sweep && config.strategy != StrategyKind::kAepo) {
      throw Error(ErrorCode::kInvalidArgument, "--lambda-sweep applies to the aepo strategy only");
    }
    return load_corpus(config);
  });

  const std::vector<double> lambdas = config.lambda_sweep ? kDefaultLambdaSweep : std::vector<double>{config.lambda};
  std::vector<InstructionMetrics> measured;
  for (double lambda : lambdas) {
    RunConfig run = config;
    run.lambda = lambda;
    const std::string tag = config.lambda_sweep ? lambda_tag(lambda) : "";
    const auto prefs_path = with_tag(config.output, tag);
    const auto selection_path = !config.lambda_sweep && config.selections.size() == 1
                                    ? config.selections.front()
                                    : with_tag(config.output, tag + ".selection");

    const auto records = stage("select", [&] {
      auto r = select_corpus(run, corpus);
      write_selections(r, selection_path, config_hash(run), run.seed);
      return r;
    });
    AnnotateOutcome outcome = stage("annotate", [&] {
      auto o = annotate_corpus(run, corpus, records);
      write_preferences(o.pairs, prefs_path);
      return o;
    });
    auto rows = stage("metrics", [&] { return measure_corpus(run, corpus, records, outcome.pairs); });
    measured.insert(measured.end(), rows.begin(), rows.end());
    result.selection_files.push_back(selection_path);
    result.preference_files.push_back(prefs_path);
    result.summaries.push_back(std::move(outcome.summary));
  }

  result.report_file = config.report.empty() ? std::filesystem::path(config.output).replace_extension(".report.txt")
                                             : config.report;
  result.report = stage("report", [&] {
    DatasetReport report = dataset_report(measured, to_string(config.distance), config_hash(config));
    write_report(report, result.report_file);
    return report;
  });
  return result;
}

}  // namespace aepo
