// SPDX-License-Identifier: Apache-2.0
#include "session.hpp"

#include <unistd.h>

#include <fstream>
#include <numeric>

#include "error.hpp"
#include "json.hpp"
#include "rng.hpp"

namespace aepo {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string task_record(const HumanTask& task) {
  ordered_json record;
  record["type"] = "task";
  record["task_id"] = task.task_id;
  record["instruction"] = task.instruction;
  record["responses"] = task.responses;
  record["permutation"] = task.permutation;
  record["strategy"] = task.strategy;
  record["lambda"] = task.lambda ? ordered_json(*task.lambda) : ordered_json(nullptr);
  return record.dump();
}

std::string judgment_record(const std::string& task_id, size_t best, size_t worst) {
  ordered_json record;
  record["type"] = "judgment";
  record["task_id"] = task_id;
  record["best"] = best;
  record["worst"] = worst;
  return record.dump();
}

void check_judgment(const HumanTask& task, size_t best, size_t worst) {
  if (best == worst) throw Error(ErrorCode::kInvalidArgument, "best and worst must differ");
  if (best >= task.k() || worst >= task.k()) {
    throw Error(ErrorCode::kInvalidArgument, "display index out of range for k=" + std::to_string(task.k()));
  }
}

}  // namespace

AnnotationSession::AnnotationSession(std::filesystem::path journal, uint64_t seed, std::chrono::seconds lease)
    : path_(std::move(journal)), seed_(seed), lease_(lease) {
  if (std::filesystem::exists(path_)) replay();
  journal_ = std::fopen(path_.c_str(), "ab");
  if (journal_ == nullptr) throw Error(ErrorCode::kIo, "cannot open journal " + path_.string());
}

AnnotationSession::~AnnotationSession() { close(); }

void AnnotationSession::replay() {
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read journal " + path_.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  size_t line_no = 0;
  size_t pos = 0;
  while (pos < content.size()) {
    ++line_no;
    const size_t eol = content.find('\n', pos);
    const auto corrupt = [&](const std::string& why) {
      return Error(ErrorCode::kParse, "corrupt journal " + path_.string() + ":" + std::to_string(line_no) + ": " + why);
    };
    if (eol == std::string::npos) throw corrupt("unterminated record");
    const std::string line = content.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) throw corrupt("not a JSON object");
    try {
      const std::string type = record.at("type").get<std::string>();
      const std::string id = record.at("task_id").get<std::string>();
      if (type == "task") {
        HumanTask task;
        task.task_id = id;
        task.instruction = record.at("instruction").get<std::string>();
        task.responses = record.at("responses").get<std::vector<std::string>>();
        task.permutation = record.at("permutation").get<std::vector<size_t>>();
        task.strategy = record.at("strategy").get<std::string>();
        if (!record.at("lambda").is_null()) task.lambda = record.at("lambda").get<double>();
        if (task.permutation.size() != task.responses.size() || task.k() < 2) {
          throw corrupt("task has inconsistent permutation");
        }
        if (tasks_.contains(id)) throw corrupt("duplicate task \"" + id + "\"");
        order_.push_back(id);
        tasks_.emplace(id, std::move(task));
      } else if (type == "judgment") {
        auto it = tasks_.find(id);
        if (it == tasks_.end()) throw corrupt("judgment for unknown task \"" + id + "\"");
        HumanTask& task = it->second;
        if (task.status == TaskStatus::kDone) throw corrupt("second judgment for task \"" + id + "\"");
        const size_t best = record.at("best").get<size_t>();
        const size_t worst = record.at("worst").get<size_t>();
        try {
          check_judgment(task, best, worst);
        } catch (const Error& e) {
          throw corrupt(e.what());
        }
        task.best = best;
        task.worst = worst;
        task.status = TaskStatus::kDone;
        consumed_ += task.k();
      } else {
        throw corrupt("unknown record type \"" + type + "\"");
      }
    } catch (const json::exception& e) {
      throw corrupt(e.what());
    }
  }
}

void AnnotationSession::append(const std::string& line) {
  const std::string out = line + "\n";
  if (std::fwrite(out.data(), 1, out.size(), journal_) != out.size() || std::fflush(journal_) != 0) {
    throw Error(ErrorCode::kIo, "cannot append to journal " + path_.string());
  }
  ::fsync(::fileno(journal_));
}

void AnnotationSession::require_open() const {
  if (journal_ == nullptr) throw Error(ErrorCode::kState, "annotation session is closed");
}

HumanTask AnnotationSession::enqueue(const SelectionResult& selection, const CandidatePool& pool) {
  validate_selection(selection, pool);
  std::lock_guard lock(mu_);
  require_open();
  if (tasks_.contains(pool.id())) {
    throw Error(ErrorCode::kConflict, "a task for instruction \"" + pool.id() + "\" already exists in this session");
  }
  HumanTask task;
  task.task_id = pool.id();
  task.instruction = pool.instruction.text;
  std::vector<size_t> slots(selection.indices.size());
  std::iota(slots.begin(), slots.end(), size_t{0});
  std::mt19937_64 rng(mix_seed(seed_, pool.id()));
  shuffle(slots, rng);
  for (size_t slot : slots) {
    task.permutation.push_back(selection.indices[slot]);
    task.responses.push_back(pool.responses[selection.indices[slot]]);
  }
  task.strategy = to_string(selection.strategy);
  task.lambda = selection.lambda;
  append(task_record(task));
  order_.push_back(task.task_id);
  tasks_.emplace(task.task_id, task);
  return task;
}

PreferencePair AnnotationSession::pair_for(const HumanTask& task) const {
  PreferencePair pair;
  pair.id = task.task_id;
  pair.instruction = task.instruction;
  pair.chosen = task.responses[*task.best];
  pair.rejected = task.responses[*task.worst];
  pair.chosen_index = task.permutation[*task.best];
  pair.rejected_index = task.permutation[*task.worst];
  pair.strategy = task.strategy;
  pair.lambda = task.lambda;
  pair.annotations_used = task.k();
  return pair;
}

PreferencePair AnnotationSession::apply_judgment(const std::string& task_id, size_t best, size_t worst,
                                                 BudgetLedger* ledger) {
  std::lock_guard lock(mu_);
  require_open();
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) throw Error(ErrorCode::kNotFound, "no task \"" + task_id + "\"");
  HumanTask& task = it->second;
  if (task.status == TaskStatus::kDone) throw Error(ErrorCode::kConflict, "task \"" + task_id + "\" is already done");
  check_judgment(task, best, worst);
  append(judgment_record(task_id, best, worst));
  task.best = best;
  task.worst = worst;
  task.status = TaskStatus::kDone;
  consumed_ += task.k();
  if (ledger != nullptr) ledger->charge(task_id, task.k());
  std::erase_if(leases_, [&](const auto& entry) { return entry.second.task_id == task_id; });
  return pair_for(task);
}

std::optional<HumanTask> AnnotationSession::next(const std::string& cursor) {
  std::lock_guard lock(mu_);
  const auto now = std::chrono::steady_clock::now();
  std::erase_if(leases_, [&](const auto& entry) {
    return entry.second.expires <= now || tasks_.at(entry.second.task_id).status == TaskStatus::kDone;
  });
  if (auto own = leases_.find(cursor); own != leases_.end()) {
    own->second.expires = now + lease_;
    return tasks_.at(own->second.task_id);
  }
  for (const auto& id : order_) {
    const HumanTask& task = tasks_.at(id);
    if (task.status == TaskStatus::kDone) continue;
    const bool leased = std::any_of(leases_.begin(), leases_.end(),
                                    [&](const auto& entry) { return entry.second.task_id == id; });
    if (leased) continue;
    leases_[cursor] = Lease{id, now + lease_};
    return task;
  }
  return std::nullopt;
}

std::optional<HumanTask> AnnotationSession::task(const std::string& task_id) const {
  std::lock_guard lock(mu_);
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) return std::nullopt;
  return it->second;
}

SessionProgress AnnotationSession::progress() const {
  std::lock_guard lock(mu_);
  SessionProgress p;
  for (const auto& [id, task] : tasks_) {
    if (task.status == TaskStatus::kDone) {
      ++p.done;
    } else {
      ++p.pending;
    }
  }
  p.consumed_annotations = consumed_;
  return p;
}

std::vector<PreferencePair> AnnotationSession::pairs() const {
  std::lock_guard lock(mu_);
  std::vector<PreferencePair> out;
  for (const auto& id : order_) {
    const HumanTask& task = tasks_.at(id);
    if (task.status == TaskStatus::kDone) out.push_back(pair_for(task));
  }
  return out;
}

size_t AnnotationSession::consumed_annotations() const {
  std::lock_guard lock(mu_);
  return consumed_;
}

void AnnotationSession::close() {
  std::lock_guard lock(mu_);
  if (journal_ != nullptr) {
    std::fflush(journal_);
    ::fsync(::fileno(journal_));
    std::fclose(journal_);
    journal_ = nullptr;
  }
}

bool AnnotationSession::is_open() const {
  std::lock_guard lock(mu_);
  return journal_ != nullptr;
}

}  // namespace aepo
