#ifndef ASTE_ASTE_H
#define ASTE_ASTE_H

#include <stddef.h>

#if defined(ASTE_BUILDING_LIBRARY)
#define ASTE_API __attribute__((visibility("default")))
#else
#define ASTE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum aste_status {
  ASTE_OK = 0,
  ASTE_ERR_USAGE = 1,   /* bad arguments or configuration */
  ASTE_ERR_DATA = 2,    /* unreadable or inconsistent input files */
  ASTE_ERR_RUNTIME = 3  /* initialisation or training failure */
} aste_status;

typedef struct aste_model aste_model;

/* Message for the last failed call on this thread; "" if none. */
ASTE_API const char* aste_last_error(void);
ASTE_API const char* aste_version(void);
/* 0 debug, 1 info, 2 warn, 3 error. */
ASTE_API void aste_set_log_level(int level);
/* Releases strings returned through char** out-parameters. */
ASTE_API void aste_string_free(char* s);

/* Trains a model. `request_json` is an object with keys
 *   config (path, optional), overrides (object, optional),
 *   train, dev, test (optional), glove, domain_emb, annotations (array),
 *   output (checkpoint path), log (optional JSON-lines path).
 * On success *result_json receives {best_epoch, best, epochs}. */
ASTE_API aste_status aste_train(const char* request_json, char** result_json);

ASTE_API aste_status aste_model_load(const char* checkpoint_path, aste_model** out);
ASTE_API void aste_model_free(aste_model* model);
ASTE_API aste_status aste_model_config(const aste_model* model, char** config_json);
/* Trainable parameter counts per top-level block plus "total". */
ASTE_API aste_status aste_model_census(const aste_model* model, char** census_json);

ASTE_API aste_status aste_model_evaluate(const aste_model* model, const char* corpus_path,
                                         const char* const* annotation_paths,
                                         size_t n_annotations, int macro,
                                         char** metrics_json);

/* Writes one JSON prediction record per input line to `output_path`.
 * Annotations come from the sidecars when given, else from `backend`.
 * Per-sentence failures become error records and are counted in
 * *n_errors (may be NULL). */
ASTE_API aste_status aste_model_predict(const aste_model* model, const char* input_path,
                                        const char* output_path,
                                        const char* const* annotation_paths,
                                        size_t n_annotations, const char* backend,
                                        size_t* n_errors);

ASTE_API aste_status aste_annotate(const char* corpus_path, const char* output_path,
                                   const char* backend);

/* Scores a predictions file against a gold corpus. */
ASTE_API aste_status aste_score_files(const char* predictions_path,
                                      const char* gold_corpus_path, int macro,
                                      char** metrics_json);

#ifdef __cplusplus
}
#endif

#endif
