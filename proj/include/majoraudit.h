/* majoraudit — C API for the college-major recommendation disparity toolkit.
 *
 * The toolkit measures demographic disparity in top-10 college-major
 * recommendations: it enumerates student-profile prompts over a score-bracket
 * by demographic-value matrix, collects responses from a chat-completion
 * endpoint (or a deterministic synthetic recommender) through a persistent
 * cache, and computes Jaccard, semantic Wasserstein, and STEM Disparity Score
 * metrics with confidence intervals, plus a score-conditional Bayesian
 * analysis.
 *
 * All functions return ma_status; MA_OK is 0. Strings returned through
 * char** out parameters are heap-allocated and released with
 * ma_string_free(). A toolkit handle is not thread-safe; use one per thread.
 */

#ifndef MAJORAUDIT_H
#define MAJORAUDIT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ma_status {
    MA_OK = 0,
    MA_PARTIAL = 1,       /* completed with per-sample failures */
    MA_ERR_CONFIG = 2,    /* configuration problem (fail fast) */
    MA_ERR_IO = 3,        /* file not readable/writable */
    MA_ERR_PARSE = 4,     /* malformed input data */
    MA_ERR_TRANSPORT = 5, /* backend failed after retries */
    MA_ERR_INVALID = 6,   /* invalid argument or domain violation */
    MA_ERR_INTERNAL = 7
} ma_status;

const char* ma_version(void);
const char* ma_status_name(ma_status status);

/* Message for the most recent failing call on this thread (kernels included);
 * empty string when the last call succeeded. The pointer stays valid until
 * the next majoraudit call on the same thread. */
const char* ma_last_error(void);

void ma_string_free(char* s);

/* ---- toolkit: one handle per configuration ------------------------------ */

typedef struct ma_toolkit ma_toolkit;

ma_status ma_toolkit_open(const char* config_path, ma_toolkit** out);
ma_status ma_toolkit_open_text(const char* config_text, ma_toolkit** out);
/* override one config key (e.g. "backend.type", "backend.parallelism") */
ma_status ma_toolkit_set(ma_toolkit* tk, const char* key, const char* value);
const char* ma_toolkit_last_error(const ma_toolkit* tk);
void ma_toolkit_close(ma_toolkit* tk);

/* ---- pipeline ------------------------------------------------------------ */

/* Parse a research file, filter to the study population, summarize group
 * shares. input_path may be NULL (config data.input); csv_path may be NULL. */
ma_status ma_run_ingest(ma_toolkit* tk, const char* input_path, const char* csv_path,
                        char** text_out);

/* Text listing of the configured cell matrix. */
ma_status ma_run_plan(ma_toolkit* tk, char** text_out);

/* Query phase only: fill the response cache. */
ma_status ma_run_collect(ma_toolkit* tk, char** text_out);

/* Full audit: query (through the cache), parse, compute metric samples,
 * aggregate with confidence intervals, and write the results file
 * (results_path, or config paths.results, default "results.json").
 * summary_json_out reports counts: cells, backend_calls, cache_hits,
 * query_failures, unreliable_cells, manifest_hash. Returns MA_PARTIAL when
 * some samples failed. */
ma_status ma_run_metrics(ma_toolkit* tk, const char* results_path, char** summary_json_out);

/* Grid report (rows demographic values by dimension, columns brackets, cells
 * "mean [lo,hi]"). metric is jaccard|wasserstein|sds. text_path optional. */
ma_status ma_run_report_table(ma_toolkit* tk, const char* metric, const char* results_path,
                              const char* csv_path, const char* text_path);

/* Decile series per demographic value of one dimension (gender|ses|race).
 * json_path optional. Results must come from a decile-bracket run. */
ma_status ma_run_report_series(ma_toolkit* tk, const char* metric, const char* dimension,
                               const char* results_path, const char* csv_path,
                               const char* json_path);

/* Score-conditional STEM posterior per group over deciles, from the cache.
 * groups_csv is a comma list of demographic value tokens (or "baseline"). */
ma_status ma_run_bayes(ma_toolkit* tk, const char* groups_csv, int top_k,
                       const char* csv_path, char** text_out);

/* ---- metric kernels (no toolkit required) -------------------------------- */

/* |a n b| / |a u b| over id arrays (duplicates ignored); two empty sets
 * score 1.0. */
ma_status ma_jaccard(const int32_t* a, size_t a_len, const int32_t* b, size_t b_len,
                     double* out);

/* Exact order-1 Wasserstein distance between distributions u and v (length k,
 * each summing to 1) under a k*k row-major cost matrix. plan_out, when not
 * NULL, receives the k*k optimal transport plan. */
ma_status ma_wasserstein(size_t k, const double* u, const double* v, const double* cost,
                         double* distance_out, double* plan_out);

/* STEM Disparity Score of one top-10 list: stem_by_rank[r] is 1 when the
 * rank r+1 recommendation is STEM. weights10 may be NULL for the default
 * (10,9,...,1); normalizer <= 0 selects the default 10. */
ma_status ma_sds(const uint8_t* stem_by_rank, const double* weights10, double normalizer,
                 double* out);

/* posterior[s] = likelihood[s]*prior[s] / sum(likelihood*prior). Fails with
 * MA_ERR_INVALID when the evidence term is zero. */
ma_status ma_bayes_posterior(size_t n_levels, const double* likelihood, const double* prior,
                             double* posterior_out);

#ifdef __cplusplus
}
#endif

#endif /* MAJORAUDIT_H */
