// SPDX-License-Identifier: Apache-2.0
#include "aepo/aepo.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <memory>
#include <new>
#include <string>

#include "annotation.hpp"
#include "config.hpp"
#include "distance.hpp"
#include "error.hpp"
#include "json.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "selection.hpp"
#include "service.hpp"
#include "session.hpp"

struct aepo_config {
  aepo::RunConfig config;
};

struct aepo_matrix {
  aepo::DistanceMatrix matrix;
};

struct aepo_session {
  std::unique_ptr<aepo::AnnotationSession> session;
};

struct aepo_service {
  std::unique_ptr<aepo::AnnotationSession> session;
  std::unique_ptr<aepo::AnnotationService> service;
};

namespace {

thread_local std::string g_last_error;

aepo_status status_of(aepo::ErrorCode code) {
  using aepo::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return AEPO_ERR_INVALID_ARGUMENT;
    case ErrorCode::kIo: return AEPO_ERR_IO;
    case ErrorCode::kParse: return AEPO_ERR_PARSE;
    case ErrorCode::kAlignment: return AEPO_ERR_ALIGNMENT;
    case ErrorCode::kCapExceeded: return AEPO_ERR_CAP_EXCEEDED;
    case ErrorCode::kTransport: return AEPO_ERR_TRANSPORT;
    case ErrorCode::kValidation: return AEPO_ERR_VALIDATION;
    case ErrorCode::kState: return AEPO_ERR_STATE;
    case ErrorCode::kConflict: return AEPO_ERR_CONFLICT;
    case ErrorCode::kNotFound: return AEPO_ERR_NOT_FOUND;
    case ErrorCode::kInvariant: return AEPO_ERR_INVARIANT;
  }
  return AEPO_ERR_INTERNAL;
}

// Runs fn, translating exceptions into a status and the thread's last error.
template <typename Fn>
aepo_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return AEPO_OK;
  } catch (const aepo::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return AEPO_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return AEPO_ERR_INTERNAL;
  }
}

void require(bool condition, const char* what) {
  if (!condition) throw aepo::Error(aepo::ErrorCode::kInvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

double or_nan(const std::optional<double>& v) {
  return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

std::string pair_json(const aepo::PreferencePair& p) {
  nlohmann::ordered_json j;
  j["id"] = p.id;
  j["instruction"] = p.instruction;
  j["chosen"] = p.chosen;
  j["rejected"] = p.rejected;
  j["chosen_index"] = p.chosen_index;
  j["rejected_index"] = p.rejected_index;
  j["strategy"] = p.strategy;
  j["lambda"] = p.lambda ? nlohmann::ordered_json(*p.lambda) : nlohmann::ordered_json(nullptr);
  j["annotations_used"] = p.annotations_used;
  return j.dump();
}

}  // namespace

extern "C" {

const char* aepo_status_name(aepo_status status) {
  switch (status) {
    case AEPO_OK: return "ok";
    case AEPO_ERR_INVALID_ARGUMENT: return "invalid argument";
    case AEPO_ERR_IO: return "io error";
    case AEPO_ERR_PARSE: return "parse error";
    case AEPO_ERR_ALIGNMENT: return "alignment error";
    case AEPO_ERR_CAP_EXCEEDED: return "enumeration cap exceeded";
    case AEPO_ERR_TRANSPORT: return "transport error";
    case AEPO_ERR_VALIDATION: return "validation error";
    case AEPO_ERR_STATE: return "invalid state";
    case AEPO_ERR_CONFLICT: return "conflict";
    case AEPO_ERR_NOT_FOUND: return "not found";
    case AEPO_ERR_INVARIANT: return "invariant violation";
    case AEPO_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* aepo_last_error(void) { return g_last_error.c_str(); }

void aepo_string_free(char* s) { std::free(s); }

aepo_status aepo_config_create(aepo_config** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    *out = new aepo_config();
  });
}

void aepo_config_destroy(aepo_config* config) { delete config; }

aepo_status aepo_config_set(aepo_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config != nullptr && key != nullptr && value != nullptr, "null argument");
    aepo::set_option(config->config, key, value);
  });
}

aepo_status aepo_config_validate(const aepo_config* config) {
  return guarded([&] {
    require(config != nullptr, "config is null");
    aepo::validate(config->config);
  });
}

aepo_status aepo_config_hash(const aepo_config* config, char** out_hex) {
  return guarded([&] {
    require(config != nullptr && out_hex != nullptr, "null argument");
    *out_hex = dup_string(aepo::config_hash(config->config));
  });
}

aepo_status aepo_run_select(const aepo_config* config, size_t* out_records) {
  return guarded([&] {
    require(config != nullptr, "config is null");
    const auto records = aepo::run_select(config->config);
    if (out_records != nullptr) *out_records = records.size();
  });
}

aepo_status aepo_run_annotate(const aepo_config* config, char** out_summary_json) {
  return guarded([&] {
    require(config != nullptr, "config is null");
    const auto summary = aepo::run_annotate(config->config);
    if (out_summary_json != nullptr) *out_summary_json = dup_string(summary.to_json());
  });
}

aepo_status aepo_run_metrics(const aepo_config* config, char** out_table) {
  return guarded([&] {
    require(config != nullptr, "config is null");
    const auto report = aepo::run_metrics(config->config);
    if (out_table != nullptr) *out_table = dup_string(aepo::format_report_table(report));
  });
}

aepo_status aepo_run_pipeline(const aepo_config* config, char** out_summary_json) {
  return guarded([&] {
    require(config != nullptr, "config is null");
    const auto outcome = aepo::run_pipeline(config->config);
    if (out_summary_json == nullptr) return;
    nlohmann::ordered_json j;
    j["summaries"] = nlohmann::ordered_json::array();
    for (const auto& s : outcome.summaries) j["summaries"].push_back(nlohmann::ordered_json::parse(s.to_json()));
    j["report"] = outcome.report_file.string();
    j["selection_files"] = nlohmann::ordered_json::array();
    for (const auto& p : outcome.selection_files) j["selection_files"].push_back(p.string());
    j["preference_files"] = nlohmann::ordered_json::array();
    for (const auto& p : outcome.preference_files) j["preference_files"].push_back(p.string());
    *out_summary_json = dup_string(j.dump());
  });
}

aepo_status aepo_matrix_from_dense(size_t n, const double* entries, aepo_matrix** out) {
  return guarded([&] {
    require(out != nullptr && (entries != nullptr || n == 0), "null argument");
    std::vector<double> values(entries, entries + n * n);
    *out = new aepo_matrix{aepo::DistanceMatrix::from_dense(n, std::move(values))};
  });
}

aepo_status aepo_matrix_from_embeddings(size_t n, size_t dim, const float* vectors, aepo_matrix** out) {
  return guarded([&] {
    require(out != nullptr && vectors != nullptr && dim > 0, "null argument or zero dimension");
    std::span<const float> all(vectors, n * dim);
    *out = new aepo_matrix{aepo::build_distance_matrix(n, [&](size_t i, size_t j) {
      return aepo::cosine_distance(all.subspan(i * dim, dim), all.subspan(j * dim, dim));
    })};
  });
}

aepo_status aepo_matrix_from_texts(size_t n, const char* const* texts, int max_n, aepo_matrix** out) {
  return guarded([&] {
    require(out != nullptr && texts != nullptr, "null argument");
    aepo::CandidatePool pool;
    pool.instruction.id = "c-api";
    for (size_t i = 0; i < n; ++i) {
      require(texts[i] != nullptr, "null text");
      pool.responses.emplace_back(texts[i]);
    }
    *out = new aepo_matrix{aepo::build_distance_matrix(pool, aepo::DistanceKind::kNgram, nullptr, max_n)};
  });
}

size_t aepo_matrix_size(const aepo_matrix* matrix) { return matrix == nullptr ? 0 : matrix->matrix.size(); }

double aepo_matrix_at(const aepo_matrix* matrix, size_t i, size_t j) {
  if (matrix == nullptr || i >= matrix->matrix.size() || j >= matrix->matrix.size()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return matrix->matrix(i, j);
}

void aepo_matrix_destroy(aepo_matrix* matrix) { delete matrix; }

aepo_status aepo_cosine_distance(const float* u, const float* v, size_t dim, double* out) {
  return guarded([&] {
    require(u != nullptr && v != nullptr && out != nullptr, "null argument");
    *out = aepo::cosine_distance({u, dim}, {v, dim});
  });
}

aepo_status aepo_ngram_distance(const char* a, const char* b, int max_n, double* out) {
  return guarded([&] {
    require(a != nullptr && b != nullptr && out != nullptr, "null argument");
    *out = aepo::ngram_overlap_distance(a, b, max_n);
  });
}

aepo_status aepo_select(const aepo_matrix* matrix, const char* strategy, size_t k, double lambda, const char* solver,
                        uint64_t seed, size_t* out_indices, size_t capacity, size_t* out_count,
                        aepo_selection_info* out_info) {
  return guarded([&] {
    require(matrix != nullptr && strategy != nullptr && out_count != nullptr, "null argument");
    const auto& m = matrix->matrix;
    aepo::SelectionResult result;
    switch (aepo::parse_strategy(strategy)) {
      case aepo::StrategyKind::kAepo: {
        const std::string s = solver == nullptr ? "auto" : solver;
        const bool exact = s == "auto" ? aepo::binomial(m.size(), k) <= aepo::kDefaultEnumerationCap
                                       : aepo::parse_solver(s) == aepo::SolverKind::kExact;
        result = exact ? aepo::select_exact(m, k, lambda) : aepo::select_greedy(m, k, lambda);
        break;
      }
      case aepo::StrategyKind::kRandom:
        result = aepo::select_random(m.size(), k, seed);
        aepo::attach_objectives(result, m);
        break;
      case aepo::StrategyKind::kWon:
        result = aepo::select_won(m.size());
        aepo::attach_objectives(result, m);
        break;
      case aepo::StrategyKind::kCoreset:
        result = aepo::select_coreset(m, k);
        break;
      case aepo::StrategyKind::kPerplexity:
        throw aepo::Error(aepo::ErrorCode::kInvalidArgument, "use aepo_select_perplexity for the perplexity strategy");
    }
    *out_count = result.indices.size();
    if (result.indices.size() > capacity || (out_indices == nullptr && !result.indices.empty())) {
      throw aepo::Error(aepo::ErrorCode::kInvalidArgument,
                        "index buffer too small: need " + std::to_string(result.indices.size()));
    }
    std::copy(result.indices.begin(), result.indices.end(), out_indices);
    if (out_info != nullptr) {
      out_info->f_rep = or_nan(result.f_rep);
      out_info->f_div = or_nan(result.f_div);
      out_info->objective = or_nan(result.objective);
    }
  });
}

aepo_status aepo_select_perplexity(const double* perplexities, size_t n, size_t out_pair[2]) {
  return guarded([&] {
    require(perplexities != nullptr && out_pair != nullptr, "null argument");
    aepo::ScoreTable table{"c-api", {perplexities, perplexities + n}, aepo::ScoreKind::kPerplexity};
    const auto result = aepo::select_perplexity_pair(table);
    out_pair[0] = result.indices[0];
    out_pair[1] = result.indices[1];
  });
}

aepo_status aepo_won_label(const size_t* indices, const double* scores, size_t count, size_t* out_chosen,
                           size_t* out_rejected) {
  return guarded([&] {
    require(indices != nullptr && scores != nullptr && out_chosen != nullptr && out_rejected != nullptr,
            "null argument");
    std::vector<std::pair<size_t, double>> scored;
    for (size_t i = 0; i < count; ++i) scored.emplace_back(indices[i], scores[i]);
    const auto label = aepo::won_label(scored);
    *out_chosen = label.chosen;
    *out_rejected = label.rejected;
  });
}

aepo_status aepo_budget_plan(const char* strategy, size_t n, size_t k, size_t corpus_size, const char* mode,
                             size_t* out_instructions, size_t* out_annotations) {
  return guarded([&] {
    require(strategy != nullptr && out_instructions != nullptr && out_annotations != nullptr, "null argument");
    const auto plan = aepo::budget_plan(aepo::parse_strategy(strategy), n, k, corpus_size,
                                        mode == nullptr ? aepo::BudgetMode::kMatched : aepo::parse_budget_mode(mode));
    *out_instructions = plan.instructions;
    *out_annotations = plan.annotations;
  });
}

aepo_status aepo_distinct_n(const char* text, int n, double* out, int* out_defined) {
  return guarded([&] {
    require(text != nullptr && out != nullptr && out_defined != nullptr, "null argument");
    const auto value = aepo::distinct_n(text, n);
    *out_defined = value.has_value() ? 1 : 0;
    if (value) *out = *value;
  });
}

aepo_status aepo_session_open(const char* journal, uint64_t seed, aepo_session** out) {
  return guarded([&] {
    require(journal != nullptr && out != nullptr, "null argument");
    *out = new aepo_session{std::make_unique<aepo::AnnotationSession>(journal, seed)};
  });
}

void aepo_session_close(aepo_session* session) { delete session; }

aepo_status aepo_session_next(aepo_session* session, const char* cursor, char** out_task_json) {
  return guarded([&] {
    require(session != nullptr && out_task_json != nullptr, "null argument");
    const auto task = session->session->next(cursor == nullptr ? "default" : cursor);
    *out_task_json = task ? dup_string(aepo::task_view_json(*task)) : nullptr;
  });
}

aepo_status aepo_session_submit(aepo_session* session, const char* task_id, size_t best, size_t worst,
                                char** out_pair_json) {
  return guarded([&] {
    require(session != nullptr && task_id != nullptr, "null argument");
    const auto pair = session->session->apply_judgment(task_id, best, worst);
    if (out_pair_json != nullptr) *out_pair_json = dup_string(pair_json(pair));
  });
}

aepo_status aepo_session_progress(const aepo_session* session, size_t* out_done, size_t* out_pending,
                                  size_t* out_consumed) {
  return guarded([&] {
    require(session != nullptr, "null argument");
    const auto p = session->session->progress();
    if (out_done != nullptr) *out_done = p.done;
    if (out_pending != nullptr) *out_pending = p.pending;
    if (out_consumed != nullptr) *out_consumed = p.consumed_annotations;
  });
}

aepo_status aepo_service_create(const aepo_config* config, aepo_service** out) {
  return guarded([&] {
    require(config != nullptr && out != nullptr, "null argument");
    const auto& c = config->config;
    aepo::validate(c);
    if (c.journal.empty()) throw aepo::Error(aepo::ErrorCode::kInvalidArgument, "--journal is required");
    auto svc = std::make_unique<aepo_service>();
    svc->session = std::make_unique<aepo::AnnotationSession>(c.journal, c.seed);
    aepo::ServiceOptions options;
    options.host = c.host;
    options.port = c.port;
    options.ui_dir = c.ui_dir;
    options.preferences_out = c.output;
    svc->service = std::make_unique<aepo::AnnotationService>(*svc->session, options);
    *out = svc.release();
  });
}

aepo_status aepo_service_bind(aepo_service* service, int* out_port) {
  return guarded([&] {
    require(service != nullptr, "null argument");
    const int port = service->service->bind();
    if (out_port != nullptr) *out_port = port;
  });
}

aepo_status aepo_service_run(aepo_service* service) {
  return guarded([&] {
    require(service != nullptr, "null argument");
    service->service->run();
  });
}

void aepo_service_stop(aepo_service* service) {
  if (service != nullptr && service->service) service->service->stop();
}

void aepo_service_destroy(aepo_service* service) {
  if (service == nullptr) return;
  service->service.reset();
  service->session.reset();
  delete service;
}

}  // extern "C"
