/* C interface to the scenemap engine.
 *
 * All functions return sm_status; SM_OK means success, anything else is an
 * error whose message is available via sm_last_error() (thread-local).
 * Strings returned through char** are heap-allocated; release them with
 * sm_string_free().
 */
#ifndef SCENEMAP_H
#define SCENEMAP_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define SCENEMAP_API __declspec(dllexport)
#else
#define SCENEMAP_API __attribute__((visibility("default")))
#endif

typedef enum sm_status {
  SM_OK = 0,
  SM_ERR_CONFIG = 1,
  SM_ERR_DATA = 2,
  SM_ERR_INTERNAL = 3
} sm_status;

typedef struct sm_pipeline sm_pipeline; /* opaque */

SCENEMAP_API const char* sm_version(void);

/* Message of the most recent error on this thread ("" when none). */
SCENEMAP_API const char* sm_last_error(void);

SCENEMAP_API void sm_string_free(char* s);

/* ---- pipeline ---------------------------------------------------------- */

/* Opens a pipeline from a JSON config file. overrides (may be NULL) are
 * "path.to.key=value" strings applied on top of the file. When
 * resume_checkpoint is non-NULL, state is restored from it (the config hash
 * must match). */
SCENEMAP_API sm_status sm_pipeline_open(const char* config_path, const char* const* overrides,
                                        int n_overrides, const char* resume_checkpoint,
                                        sm_pipeline** out);

/* Processes one block; *done is set to 1 when the stream is exhausted. */
SCENEMAP_API sm_status sm_pipeline_step(sm_pipeline* p, int* done);

/* Processes all remaining blocks and writes the outputs. */
SCENEMAP_API sm_status sm_pipeline_run(sm_pipeline* p);

/* Writes outputs for the blocks processed so far. */
SCENEMAP_API sm_status sm_pipeline_finalize(sm_pipeline* p);

/* Ego-to-object distances as a JSON array, ascending. states is a comma
 * list drawn from recent,retained,removed (NULL = recent,retained). With
 * pairwise != 0 the result also carries object-to-object distances. */
SCENEMAP_API sm_status sm_pipeline_distances(sm_pipeline* p, const char* states, int pairwise,
                                             char** json_out);

SCENEMAP_API void sm_pipeline_close(sm_pipeline* p);

/* ---- stateless commands ------------------------------------------------ */

/* Generates a synthetic stream from a scene-spec JSON file. summary_json
 * (optional) receives {manifest, frames, blocks, ...}. */
SCENEMAP_API sm_status sm_synth_generate(const char* scene_spec_path, const char* out_dir,
                                         char** summary_json);

/* Absolute trajectory error between two TUM files. */
SCENEMAP_API sm_status sm_eval_ate(const char* est_path, const char* gt_path, double max_dt,
                                   int with_scale, char** json_out);

/* Accuracy / completion / Chamfer between two PLY clouds. */
SCENEMAP_API sm_status sm_eval_recon(const char* pred_path, const char* gt_path, int align,
                                     int use_median, char** json_out);

SCENEMAP_API sm_status sm_checkpoint_inspect(const char* checkpoint_path, char** json_out);

/* what: "map" (PLY), "objects" (JSON) or "events" (JSONL). */
SCENEMAP_API sm_status sm_export(const char* checkpoint_path, const char* what,
                                 const char* out_path);

/* Distance query over a checkpointed registry. */
SCENEMAP_API sm_status sm_query_distances(const char* checkpoint_path, const char* states,
                                          int pairwise, char** json_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SCENEMAP_H */
