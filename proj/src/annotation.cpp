// SPDX-License-Identifier: Apache-2.0
#include "annotation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include "error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace aepo {

Label won_label(std::span<const std::pair<size_t, double>> scores) {
  if (scores.size() < 2) throw Error(ErrorCode::kInvalidArgument, "labelling needs at least 2 scored responses");
  std::set<size_t> seen;
  for (const auto& [index, score] : scores) {
    if (!std::isfinite(score)) {
      throw Error(ErrorCode::kValidation, "score for response " + std::to_string(index) + " is not finite");
    }
    if (!seen.insert(index).second) {
      throw Error(ErrorCode::kInvalidArgument, "response " + std::to_string(index) + " scored twice");
    }
  }
  const auto [lo_it, hi_it] = std::minmax_element(
      scores.begin(), scores.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  const double hi = hi_it->second;
  const double lo = lo_it->second;
  size_t chosen = SIZE_MAX;
  for (const auto& [index, score] : scores) {
    if (score == hi) chosen = std::min(chosen, index);
  }
  size_t rejected = SIZE_MAX;
  for (const auto& [index, score] : scores) {
    if (score == lo && index != chosen) rejected = std::min(rejected, index);
  }
  return {chosen, rejected};
}

void BudgetLedger::charge(const std::string& id, size_t units) {
  std::lock_guard lock(mu_);
  consumed_ += units;
  entries_.push_back({id, units});
}

size_t BudgetLedger::consumed() const {
  std::lock_guard lock(mu_);
  return consumed_;
}

std::vector<LedgerEntry> BudgetLedger::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

BudgetMode parse_budget_mode(std::string_view name) {
  if (name == "matched") return BudgetMode::kMatched;
  if (name == "unconstrained") return BudgetMode::kUnconstrained;
  throw Error(ErrorCode::kInvalidArgument, "unknown budget mode \"" + std::string(name) +
                                               "\" (expected matched|unconstrained)");
}

const char* to_string(BudgetMode mode) {
  return mode == BudgetMode::kMatched ? "matched" : "unconstrained";
}

BudgetPlan budget_plan(StrategyKind strategy, size_t n, size_t k, size_t corpus_size, BudgetMode mode) {
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "budget plan needs N >= 2");
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "budget plan needs k >= 2");
  switch (strategy) {
    case StrategyKind::kWon: {
      if (mode == BudgetMode::kUnconstrained) return {corpus_size, n * corpus_size};
      const size_t used = std::min(corpus_size, corpus_size * k / n);
      return {used, n * used};
    }
    case StrategyKind::kPerplexity:
      if (k != 2) throw Error(ErrorCode::kInvalidArgument, "the perplexity strategy always selects k=2");
      return {corpus_size, 2 * corpus_size};
    case StrategyKind::kAepo:
    case StrategyKind::kRandom:
    case StrategyKind::kCoreset:
      if (n < k) {
        throw Error(ErrorCode::kInvalidArgument, std::string(to_string(strategy)) + " needs N >= k (N=" +
                                                     std::to_string(n) + ", k=" + std::to_string(k) + ")");
      }
      return {corpus_size, k * corpus_size};
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown strategy");
}

void validate_selection(const SelectionResult& selection, const CandidatePool& pool) {
  const auto& idx = selection.indices;
  if (idx.size() < 2) {
    throw Error(ErrorCode::kValidation, "selection for \"" + pool.id() + "\" has fewer than 2 responses");
  }
  std::set<size_t> seen;
  for (size_t i : idx) {
    if (i >= pool.size()) {
      throw Error(ErrorCode::kValidation, "selection for \"" + pool.id() + "\" references response " +
                                              std::to_string(i) + " but N=" + std::to_string(pool.size()));
    }
    if (!seen.insert(i).second) {
      throw Error(ErrorCode::kValidation, "selection for \"" + pool.id() + "\" repeats response " + std::to_string(i));
    }
  }
}

PreferencePair make_preference(const SelectionResult& selection, const CandidatePool& pool, Label label) {
  PreferencePair pair;
  pair.id = pool.id();
  pair.instruction = pool.instruction.text;
  pair.chosen = pool.responses.at(label.chosen);
  pair.rejected = pool.responses.at(label.rejected);
  pair.chosen_index = label.chosen;
  pair.rejected_index = label.rejected;
  pair.strategy = to_string(selection.strategy);
  pair.lambda = selection.lambda;
  pair.annotations_used = selection.indices.size();
  validate_pair(pair);
  return pair;
}

PreferencePair annotate_with_table(const SelectionResult& selection, const CandidatePool& pool,
                                   const ScoreTable& rewards, BudgetLedger& ledger) {
  if (rewards.kind != ScoreKind::kReward) {
    throw Error(ErrorCode::kInvalidArgument, "annotation needs a reward table, got " + std::string(to_string(rewards.kind)));
  }
  check_alignment(pool, rewards);
  validate_selection(selection, pool);
  std::vector<std::pair<size_t, double>> scored;
  scored.reserve(selection.indices.size());
  for (size_t i : selection.indices) scored.emplace_back(i, rewards.scores[i]);
  PreferencePair pair = make_preference(selection, pool, won_label(scored));
  ledger.charge(pool.id(), selection.indices.size());
  return pair;
}

RemoteScorer::RemoteScorer(RemoteScorerOptions options) : options_(std::move(options)) {
  if (options_.attempts < 1) throw Error(ErrorCode::kInvalidArgument, "remote scorer needs at least one attempt");
  const std::string& url = options_.url;
  const size_t scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, "scorer url \"" + url + "\" must include a scheme (http://host:port)");
  }
  const size_t slash = url.find('/', scheme + 3);
  scheme_host_port_ = url.substr(0, slash);
  std::string prefix = slash == std::string::npos ? "" : url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  path_ = prefix + "/score";
}

double RemoteScorer::score(const std::string& instruction, const std::string& response) const {
  const std::string body = nlohmann::json{{"instruction", instruction}, {"response", response}}.dump();
  auto backoff = options_.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= options_.attempts; ++attempt) {
    httplib::Client client(scheme_host_port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    auto res = client.Post(path_, body, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
      if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("score") || !parsed["score"].is_number()) {
        throw Error(ErrorCode::kValidation, "scorer returned a malformed body: " + res->body.substr(0, 200));
      }
      const double value = parsed["score"].get<double>();
      if (!std::isfinite(value)) throw Error(ErrorCode::kValidation, "scorer returned a non-finite score");
      return value;
    }
    if (res && res->status >= 400 && res->status < 500) {
      throw Error(ErrorCode::kTransport, "scorer rejected request with HTTP " + std::to_string(res->status));
    }
    last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    if (attempt < options_.attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw Error(ErrorCode::kTransport, "scorer at " + options_.url + " failed after " +
                                         std::to_string(options_.attempts) + " attempts: " + last_error);
}

PreferencePair annotate_with_remote(const SelectionResult& selection, const CandidatePool& pool,
                                    const RemoteScorer& scorer, BudgetLedger& ledger) {
  validate_selection(selection, pool);
  std::vector<std::pair<size_t, double>> scored;
  scored.reserve(selection.indices.size());
  for (size_t i : selection.indices) scored.emplace_back(i, scorer.score(pool.instruction.text, pool.responses[i]));
  PreferencePair pair = make_preference(selection, pool, won_label(scored));
  ledger.charge(pool.id(), selection.indices.size());
  return pair;
}

}  // namespace aepo
