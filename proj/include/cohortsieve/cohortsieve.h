/* C interface to the cohortsieve pipeline.
 *
 * Every function that can fail returns a cs_status; on failure the handle or
 * out-parameter is untouched and cs_last_error() describes the problem for the
 * calling thread. Strings and id arrays returned through out-parameters are
 * owned by the caller and released with cs_text_free / cs_ids_free. Handles
 * are released with their matching *_free function; passing NULL is a no-op.
 */
#ifndef COHORTSIEVE_H
#define COHORTSIEVE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(COHORTSIEVE_BUILD)
#define CS_API __declspec(dllexport)
#else
#define CS_API __declspec(dllimport)
#endif
#else
#define CS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cs_status {
    CS_OK = 0,
    CS_ERR_USAGE = 1,     /* bad arguments or configuration */
    CS_ERR_DATA = 2,      /* malformed or missing input data */
    CS_ERR_TRANSPORT = 3, /* backend request failed */
    CS_ERR_INTERNAL = 4   /* unexpected failure; a bug */
} cs_status;

CS_API const char* cs_version(void);

/* Message for the most recent failure on this thread; empty, never NULL. */
CS_API const char* cs_last_error(void);

typedef struct cs_graph cs_graph;
typedef struct cs_registry cs_registry;
typedef struct cs_run cs_run;

/* --- ontology ----------------------------------------------------------- */

CS_API cs_status cs_graph_load_simple(const char* tsv_path, cs_graph** out);
CS_API cs_status cs_graph_load_rf2(const char* concepts_path, const char* descriptions_path,
                                   const char* relationships_path, cs_graph** out);
CS_API void cs_graph_free(cs_graph* graph);
CS_API size_t cs_graph_concept_count(const cs_graph* graph);
CS_API int cs_graph_contains(const cs_graph* graph, int64_t concept_id);

/* Reflexive descendant closure of `root`, ascending. */
CS_API cs_status cs_graph_descendants(const cs_graph* graph, int64_t root, int64_t** out_ids,
                                      size_t* out_count);
CS_API void cs_ids_free(int64_t* ids);

/* --- criteria ------------------------------------------------------------ */

CS_API cs_status cs_registry_load(const char* json_path, cs_registry** out);
CS_API void cs_registry_free(cs_registry* registry);
CS_API size_t cs_registry_count(const cs_registry* registry);

/* --- runs ---------------------------------------------------------------- */

/* Loads a run config; run_dir_override may be NULL or empty to keep the
 * config's own run_dir. */
CS_API cs_status cs_run_open(const char* config_path, const char* run_dir_override,
                             cs_run** out);
CS_API void cs_run_free(cs_run* run);
CS_API const char* cs_run_dir(const cs_run* run);

CS_API cs_status cs_run_build_ontology(cs_run* run);
CS_API cs_status cs_run_classify(cs_run* run);

/* gold_dir may be NULL to score against the configured split. On success
 * *out_report holds the rendered metrics table. */
CS_API cs_status cs_run_evaluate(cs_run* run, const char* gold_dir, char** out_report);

CS_API cs_status cs_compare_runs(const char* run_a, const char* run_b, char** out_text);
CS_API void cs_text_free(char* text);

/* --- fixtures ------------------------------------------------------------ */

CS_API cs_status cs_fixtures_generate(const char* out_dir, int patients, uint64_t seed,
                                      double train_fraction);

#ifdef __cplusplus
}
#endif

#endif /* COHORTSIEVE_H */
