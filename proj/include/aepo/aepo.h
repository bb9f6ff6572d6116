/* SPDX-License-Identifier: Apache-2.0 */
/*
 * C interface to the aepo preference-dataset toolkit.
 *
 * Every function returns an aepo_status. On failure, aepo_last_error()
 * returns a message for the calling thread that stays valid until the next
 * aepo call on that thread. Strings returned through char** out-parameters
 * are owned by the caller and released with aepo_string_free().
 */
#ifndef AEPO_AEPO_H
#define AEPO_AEPO_H

#include <stddef.h>
#include <stdint.h>

#if defined(AEPO_BUILDING_LIBRARY)
#define AEPO_API __attribute__((visibility("default")))
#else
#define AEPO_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum aepo_status {
  AEPO_OK = 0,
  AEPO_ERR_INVALID_ARGUMENT = 1,
  AEPO_ERR_IO = 2,
  AEPO_ERR_PARSE = 3,
  AEPO_ERR_ALIGNMENT = 4,
  AEPO_ERR_CAP_EXCEEDED = 5,
  AEPO_ERR_TRANSPORT = 6,
  AEPO_ERR_VALIDATION = 7,
  AEPO_ERR_STATE = 8,
  AEPO_ERR_CONFLICT = 9,
  AEPO_ERR_NOT_FOUND = 10,
  AEPO_ERR_INVARIANT = 11,
  AEPO_ERR_INTERNAL = 12
} aepo_status;

AEPO_API const char* aepo_status_name(aepo_status status);
AEPO_API const char* aepo_last_error(void);
AEPO_API void aepo_string_free(char* s);

/* ---- run configuration ------------------------------------------------ */

/* Keys are the long command-line flag names without the leading dashes, e.g.
 * "strategy", "n-cap", "lambda", "input". "selection" and "preferences"
 * accumulate; other keys overwrite. */
typedef struct aepo_config aepo_config;

AEPO_API aepo_status aepo_config_create(aepo_config** out);
AEPO_API void aepo_config_destroy(aepo_config* config);
AEPO_API aepo_status aepo_config_set(aepo_config* config, const char* key, const char* value);
AEPO_API aepo_status aepo_config_validate(const aepo_config* config);
AEPO_API aepo_status aepo_config_hash(const aepo_config* config, char** out_hex);

/* ---- commands --------------------------------------------------------- */

AEPO_API aepo_status aepo_run_select(const aepo_config* config, size_t* out_records);
/* out_summary_json: ledger summary (instructions, annotations, failures). */
AEPO_API aepo_status aepo_run_annotate(const aepo_config* config, char** out_summary_json);
/* out_table: the aligned report table. */
AEPO_API aepo_status aepo_run_metrics(const aepo_config* config, char** out_table);
/* out_summary_json: {"summaries": [...], "report": path, "selection_files": [...], "preference_files": [...]} */
AEPO_API aepo_status aepo_run_pipeline(const aepo_config* config, char** out_summary_json);

/* ---- distances -------------------------------------------------------- */

typedef struct aepo_matrix aepo_matrix;

AEPO_API aepo_status aepo_matrix_from_dense(size_t n, const double* entries, aepo_matrix** out);
/* vectors: n rows of dim floats, row-major. */
AEPO_API aepo_status aepo_matrix_from_embeddings(size_t n, size_t dim, const float* vectors, aepo_matrix** out);
AEPO_API aepo_status aepo_matrix_from_texts(size_t n, const char* const* texts, int max_n, aepo_matrix** out);
AEPO_API size_t aepo_matrix_size(const aepo_matrix* matrix);
AEPO_API double aepo_matrix_at(const aepo_matrix* matrix, size_t i, size_t j);
AEPO_API void aepo_matrix_destroy(aepo_matrix* matrix);

AEPO_API aepo_status aepo_cosine_distance(const float* u, const float* v, size_t dim, double* out);
AEPO_API aepo_status aepo_ngram_distance(const char* a, const char* b, int max_n, double* out);

/* ---- selection -------------------------------------------------------- */

typedef struct aepo_selection_info {
  double f_rep;
  double f_div;     /* NaN when fewer than two responses are selected */
  double objective; /* NaN for strategies other than aepo */
} aepo_selection_info;

/* strategy: aepo|random|won|coreset. solver: exact|greedy|auto (aepo only).
 * Writes up to `capacity` indices; *out_count receives the subset size. */
AEPO_API aepo_status aepo_select(const aepo_matrix* matrix, const char* strategy, size_t k, double lambda,
                                 const char* solver, uint64_t seed, size_t* out_indices, size_t capacity,
                                 size_t* out_count, aepo_selection_info* out_info);

/* out_pair[0] = argmax perplexity, out_pair[1] = argmin. */
AEPO_API aepo_status aepo_select_perplexity(const double* perplexities, size_t n, size_t out_pair[2]);

/* ---- annotation ------------------------------------------------------- */

AEPO_API aepo_status aepo_won_label(const size_t* indices, const double* scores, size_t count, size_t* out_chosen,
                                    size_t* out_rejected);

/* mode: matched|unconstrained */
AEPO_API aepo_status aepo_budget_plan(const char* strategy, size_t n, size_t k, size_t corpus_size, const char* mode,
                                      size_t* out_instructions, size_t* out_annotations);

/* ---- metrics ---------------------------------------------------------- */

/* *out_defined is 0 (and *out untouched) when the text has fewer than n tokens. */
AEPO_API aepo_status aepo_distinct_n(const char* text, int n, double* out, int* out_defined);

/* ---- interactive sessions --------------------------------------------- */

typedef struct aepo_session aepo_session;

AEPO_API aepo_status aepo_session_open(const char* journal, uint64_t seed, aepo_session** out);
AEPO_API void aepo_session_close(aepo_session* session);
/* *out_task_json is NULL when no task is available for the cursor. */
AEPO_API aepo_status aepo_session_next(aepo_session* session, const char* cursor, char** out_task_json);
AEPO_API aepo_status aepo_session_submit(aepo_session* session, const char* task_id, size_t best, size_t worst,
                                         char** out_pair_json);
AEPO_API aepo_status aepo_session_progress(const aepo_session* session, size_t* out_done, size_t* out_pending,
                                           size_t* out_consumed);

/* ---- annotation service ----------------------------------------------- */

/* Uses the config's journal, seed, host, port, ui-dir and output
 * (preferences rewritten after each judgment). */
typedef struct aepo_service aepo_service;

AEPO_API aepo_status aepo_service_create(const aepo_config* config, aepo_service** out);
AEPO_API aepo_status aepo_service_bind(aepo_service* service, int* out_port);
/* Blocks until aepo_service_stop(); flushes and closes the journal on return. */
AEPO_API aepo_status aepo_service_run(aepo_service* service);
AEPO_API void aepo_service_stop(aepo_service* service);
AEPO_API void aepo_service_destroy(aepo_service* service);

#ifdef __cplusplus
}
#endif

#endif /* AEPO_AEPO_H */
