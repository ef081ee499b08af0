/* Dense correspondence learning: C interface.
 *
 * Every function returns a dcorr_status. On failure the thread-local message
 * from dcorr_last_error() describes what went wrong. Strings returned through
 * `char**` out-parameters are owned by the caller and released with
 * dcorr_string_free(). Handles are released with their *_free function;
 * passing NULL to a free function is allowed.
 */
#ifndef DCORR_DCORR_H
#define DCORR_DCORR_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(DCORR_BUILDING_LIBRARY)
#    define DCORR_API __declspec(dllexport)
#  else
#    define DCORR_API __declspec(dllimport)
#  endif
#else
#  define DCORR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dcorr_status {
  DCORR_OK = 0,
  DCORR_ERR_ARGUMENT = 1,      /* invalid argument or shape */
  DCORR_ERR_DATA = 2,          /* missing or invalid input data */
  DCORR_ERR_FORMAT = 3,        /* malformed file */
  DCORR_ERR_CONFIGURATION = 4, /* invalid configuration or unavailable backend */
  DCORR_ERR_COMPUTATION = 5,   /* numerical failure (e.g. NaN coordinates) */
  DCORR_ERR_INVARIANT = 6,     /* internal invariant violated */
  DCORR_ERR_TRAINING = 7,      /* non-finite loss during training */
  DCORR_ERR_INTERNAL = 8       /* anything else */
} dcorr_status;

/* Refinements of DCORR_ERR_DATA reported by dcorr_last_error_detail(). */
typedef enum dcorr_error_detail {
  DCORR_DETAIL_NONE = 0,
  DCORR_DETAIL_DEGENERATE_MOTION = 1,
  DCORR_DETAIL_RANK = 2
} dcorr_error_detail;

typedef struct dcorr_model dcorr_model;
typedef struct dcorr_flow dcorr_flow;

DCORR_API const char* dcorr_version(void);
DCORR_API const char* dcorr_status_string(dcorr_status status);
DCORR_API const char* dcorr_last_error(void);
DCORR_API dcorr_error_detail dcorr_last_error_detail(void);
DCORR_API void dcorr_string_free(char* s);

/* 0 debug, 1 info, 2 warning (default), 3 error, 4 silent. */
DCORR_API void dcorr_set_log_level(int level);

/* Configuration. `overrides_json` (may be NULL) is a JSON merge patch applied
 * to the file before validation, e.g. {"seed": 3}. The result is
 * {"config": {...}, "config_hash": "..."}. */
DCORR_API dcorr_status dcorr_config_resolve(const char* config_path, const char* overrides_json, char** result_json);

/* Training. Writes checkpoints and metrics.jsonl into `out_dir`. `resume_path`
 * may be NULL. The result summarizes the run (final step, last losses,
 * checkpoints, config hash). */
DCORR_API dcorr_status dcorr_train(const char* config_path, const char* overrides_json, const char* resume_path,
                                   const char* out_dir, char** result_json);

/* Models. */
DCORR_API dcorr_status dcorr_model_from_config(const char* config_path, const char* overrides_json,
                                               dcorr_model** out);
DCORR_API dcorr_status dcorr_model_load(const char* checkpoint_path, dcorr_model** out);
DCORR_API void dcorr_model_free(dcorr_model* model);
/* {"config_hash", "parameters", "config"} */
DCORR_API dcorr_status dcorr_model_info(const dcorr_model* model, char** info_json);

/* Flow fields: a single H x W field of (dx, dy) in pixels, stored
 * channel-first as float[2][H][W]. */
DCORR_API dcorr_status dcorr_flow_create(int64_t height, int64_t width, const float* data, dcorr_flow** out);
DCORR_API dcorr_status dcorr_flow_read(const char* path, dcorr_flow** out);
DCORR_API dcorr_status dcorr_flow_write(const dcorr_flow* flow, const char* path);
DCORR_API dcorr_status dcorr_flow_shape(const dcorr_flow* flow, int64_t* height, int64_t* width);
/* Borrowed pointer valid until the flow is freed. */
DCORR_API dcorr_status dcorr_flow_data(const dcorr_flow* flow, const float** data);
DCORR_API void dcorr_flow_free(dcorr_flow* flow);

/* Dense flow from `source` to `target`. Images are float[3][H][W] RGB in
 * [0,1]; the flow has the same H x W. */
DCORR_API dcorr_status dcorr_infer_flow(dcorr_model* model, const float* source, const float* target,
                                        int64_t height, int64_t width, dcorr_flow** out);
DCORR_API dcorr_status dcorr_infer_flow_files(dcorr_model* model, const char* source_path, const char* target_path,
                                              dcorr_flow** out);

/* Point-tracking evaluation. Exactly one of `model` and `flows_dir` is
 * required; `flows_dir` holds <video>/<s>_<t>.dfl1 files. */
DCORR_API dcorr_status dcorr_eval_tapvid(dcorr_model* model, const char* data_dir, const char* flows_dir,
                                         int exclude_occluded, char** report_json);
/* `filter_path` may be NULL. */
DCORR_API dcorr_status dcorr_eval_articulation(dcorr_model* model, const char* data_dir, const char* filter_path,
                                               char** report_json);

/* Revolute joint from n >= 3 point pairs (row-major double[n][3] each). */
DCORR_API dcorr_status dcorr_fit_revolute(const double* source, const double* target, size_t n, double axis[3],
                                          double pivot[3], double* state_deg);

/* Goal-conditioned action from an RGB-D observation directory and a goal
 * image; `done_threshold_px` <= 0 selects the default of 3 px. */
DCORR_API dcorr_status dcorr_plan_action(dcorr_model* model, const char* current_dir, const char* goal_image,
                                         double done_threshold_px, char** action_json);

/* Visualizations written as PNG. */
DCORR_API dcorr_status dcorr_viz_overlay(const dcorr_flow* flow, const char* source_path, const char* target_path,
                                         int64_t spacing, const char* out_png);
DCORR_API dcorr_status dcorr_viz_pca(dcorr_model* model, const char* source_path, const char* target_path,
                                     const char* out_png);

#ifdef __cplusplus
}
#endif

#endif /* DCORR_DCORR_H */
