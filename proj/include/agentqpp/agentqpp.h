/* C interface to the agentqpp library.
 *
 * Every function returns an aqpp_status. On failure a description of the
 * error is available from aqpp_last_error() on the same thread until the next
 * call into the library. Strings handed out by the library must be released
 * with aqpp_string_free. */
#ifndef AGENTQPP_H
#define AGENTQPP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(AGENTQPP_BUILDING)
#    define AQPP_API __declspec(dllexport)
#  else
#    define AQPP_API __declspec(dllimport)
#  endif
#else
#  define AQPP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum aqpp_status {
    AQPP_OK = 0,
    AQPP_ERR_ARGUMENT = 1,
    AQPP_ERR_CONFIG = 2,
    AQPP_ERR_IO = 3,
    AQPP_ERR_PARSE = 4,
    AQPP_ERR_NOT_FOUND = 5,
    AQPP_ERR_TRANSPORT = 6,
    AQPP_ERR_PREDICTOR_UNDEFINED = 7,
    AQPP_ERR_PREDICTOR_INPUT = 8,
    AQPP_ERR_RERANK = 9,
    AQPP_ERR_INTERNAL = 10
} aqpp_status;

typedef struct aqpp_index aqpp_index;
typedef struct aqpp_ranked_list aqpp_ranked_list;

typedef struct aqpp_run_summary {
    size_t episodes;
    size_t answered;
    size_t budget_exhausted;
    size_t malformed;
    double em_mean;
    double f1_mean;
} aqpp_run_summary;

AQPP_API const char* aqpp_version(void);
AQPP_API const char* aqpp_last_error(void);
AQPP_API const char* aqpp_status_name(aqpp_status status);
AQPP_API void aqpp_string_free(char* s);

/* Lexical index */
AQPP_API aqpp_status aqpp_index_build(const char* corpus_jsonl_path, aqpp_index** out);
AQPP_API aqpp_status aqpp_index_load(const char* index_path, aqpp_index** out);
AQPP_API aqpp_status aqpp_index_save(const aqpp_index* index, const char* path);
AQPP_API aqpp_status aqpp_index_doc_count(const aqpp_index* index, size_t* out);
AQPP_API aqpp_status aqpp_index_search(const aqpp_index* index, const char* query, size_t k, aqpp_ranked_list** out);
AQPP_API void aqpp_index_free(aqpp_index* index);

/* Ranked lists */
AQPP_API size_t aqpp_ranked_list_size(const aqpp_ranked_list* list);
/* Borrowed pointer, valid while the list lives. */
AQPP_API aqpp_status aqpp_ranked_list_entry(const aqpp_ranked_list* list, size_t i, const char** docno, double* score);
AQPP_API aqpp_status aqpp_ranked_list_nqc(const aqpp_ranked_list* list, size_t depth, double* out);
AQPP_API void aqpp_ranked_list_free(aqpp_ranked_list* list);

/* Metrics */
AQPP_API aqpp_status aqpp_token_f1(const char* prediction, const char* const* golds, size_t n_golds, double* out);
AQPP_API aqpp_status aqpp_exact_match(const char* prediction, const char* const* golds, size_t n_golds, int* out);
/* *defined is 0 when either side is constant. */
AQPP_API aqpp_status aqpp_spearman(const double* xs, const double* ys, size_t n, double* out, int* defined);

/* Experiment commands */
AQPP_API aqpp_status aqpp_cmd_index(const char* corpus_jsonl_path, const char* out_path, size_t* doc_count);
AQPP_API aqpp_status aqpp_cmd_run(const char* config_path, aqpp_run_summary* out);
/* Writes reports into out_dir; *written receives a newline-separated list of paths. */
AQPP_API aqpp_status aqpp_cmd_analyze(const char* const* run_dirs, size_t n_dirs, const char* out_dir, char** written);
AQPP_API aqpp_status aqpp_cmd_trace_show(const char* traces_path, const char* question_id, char** out);

#ifdef __cplusplus
}
#endif

#endif
