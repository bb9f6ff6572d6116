// SPDX-License-Identifier: Apache-2.0
#include "config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <thread>

#include "error.hpp"
#include "json.hpp"

namespace aepo {
namespace {

template <typename T>
T parse_integer(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw Error(ErrorCode::kInvalidArgument, "--" + std::string(key) + ": expected an integer, got \"" +
                                                 std::string(value) + "\"");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  const std::string s(value);
  size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || !std::isfinite(out)) {
    throw Error(ErrorCode::kInvalidArgument, "--" + std::string(key) + ": expected a number, got \"" + s + "\"");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "1" || value == "true" || value == "on" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "off" || value == "no") return false;
  throw Error(ErrorCode::kInvalidArgument, "--" + std::string(key) + ": expected a boolean");
}

}  // namespace

JudgeKind parse_judge(std::string_view name) {
  if (name == "auto") return JudgeKind::kAuto;
  if (name == "table") return JudgeKind::kTable;
  if (name == "remote") return JudgeKind::kRemote;
  if (name == "human") return JudgeKind::kHuman;
  throw Error(ErrorCode::kInvalidArgument, "unknown judge \"" + std::string(name) + "\" (expected auto|table|remote|human)");
}

const char* to_string(JudgeKind kind) {
  switch (kind) {
    case JudgeKind::kAuto: return "auto";
    case JudgeKind::kTable: return "table";
    case JudgeKind::kRemote: return "remote";
    case JudgeKind::kHuman: return "human";
  }
  return "?";
}

void set_option(RunConfig& c, std::string_view key, std::string_view value) {
  if (key == "strategy") c.strategy = parse_strategy(value);
  else if (key == "distance") c.distance = parse_distance_kind(value);
  else if (key == "max-n") c.max_n = parse_integer<int>(key, value);
  else if (key == "k") c.k = parse_integer<size_t>(key, value);
  else if (key == "lambda") c.lambda = parse_real(key, value);
  else if (key == "lambda-sweep") c.lambda_sweep = parse_bool(key, value);
  else if (key == "n-cap") c.n_cap = parse_integer<size_t>(key, value);
  else if (key == "solver") {
    if (value == "auto") c.solver.reset();
    else c.solver = parse_solver(value);
  }
  else if (key == "seed") c.seed = parse_integer<uint64_t>(key, value);
  else if (key == "budget") c.budget = parse_budget_mode(value);
  else if (key == "enumeration-cap") c.enumeration_cap = parse_integer<uint64_t>(key, value);
  else if (key == "judge") c.judge = parse_judge(value);
  else if (key == "concurrency") c.concurrency = parse_integer<size_t>(key, value);
  else if (key == "input") c.input = value;
  else if (key == "embeddings") c.embeddings = value;
  else if (key == "scores") c.scores = value;
  else if (key == "perplexity") c.perplexity = value;
  else if (key == "selection") c.selections.emplace_back(value);
  else if (key == "preferences") c.preferences.emplace_back(value);
  else if (key == "output") c.output = value;
  else if (key == "report") c.report = value;
  else if (key == "journal") c.journal = value;
  else if (key == "ui-dir") c.ui_dir = value;
  else if (key == "scorer-url") c.scorer_url = value;
  else if (key == "timeout") c.timeout_ms = parse_integer<int>(key, value);
  else if (key == "host") c.host = value;
  else if (key == "port") c.port = parse_integer<int>(key, value);
  else throw Error(ErrorCode::kInvalidArgument, "unknown option \"" + std::string(key) + "\"");
}

void validate(const RunConfig& c) {
  const auto fail = [](const std::string& why) { throw Error(ErrorCode::kInvalidArgument, why); };
  if (c.k < 2) fail("--k must be >= 2");
  if (!(c.lambda >= 0.0)) fail("--lambda must be >= 0");
  if (c.max_n < 1 || c.max_n > 4) fail("--max-n must be in 1..4");
  if (c.n_cap && *c.n_cap < 2) fail("--n-cap must be >= 2");
  if (c.n_cap && *c.n_cap < c.k && c.strategy != StrategyKind::kWon) fail("--n-cap must be >= --k");
  if (c.strategy == StrategyKind::kPerplexity && c.k != 2) fail("the perplexity strategy selects exactly 2 responses (--k 2)");
  if (c.solver && *c.solver == SolverKind::kNotApplicable) fail("--solver must be exact or greedy");
  if (c.enumeration_cap == 0) fail("--enumeration-cap must be positive");
  if (c.timeout_ms <= 0) fail("--timeout must be positive");
  if (c.port < 0 || c.port > 65535) fail("--port must be in 0..65535");
}

std::string config_hash(const RunConfig& c) {
  nlohmann::ordered_json knobs;
  knobs["strategy"] = to_string(c.strategy);
  knobs["distance"] = to_string(c.distance);
  knobs["max_n"] = c.max_n;
  knobs["k"] = c.k;
  knobs["lambda"] = c.lambda;
  knobs["lambda_sweep"] = c.lambda_sweep;
  knobs["n_cap"] = c.n_cap ? nlohmann::ordered_json(*c.n_cap) : nlohmann::ordered_json(nullptr);
  knobs["solver"] = c.solver ? to_string(*c.solver) : "auto";
  knobs["seed"] = c.seed;
  knobs["budget"] = to_string(c.budget);
  knobs["enumeration_cap"] = c.enumeration_cap;
  const std::string canonical = knobs.dump();
  uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001B3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

size_t effective_concurrency(const RunConfig& c) {
  if (c.concurrency > 0) return c.concurrency;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace aepo
