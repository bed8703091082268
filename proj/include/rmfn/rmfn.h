/* C interface to the rmfn library. All handles are opaque; every call that
 * can fail returns an rmfn_status and leaves a one-line description in
 * rmfn_last_error() (per thread, valid until the next failing call). */
#ifndef RMFN_RMFN_H
#define RMFN_RMFN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RMFN_API __declspec(dllexport)
#else
#define RMFN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rmfn_status {
  RMFN_OK = 0,
  RMFN_INVALID_ARGUMENT = 1,
  RMFN_SHAPE = 2,
  RMFN_IO = 3,
  RMFN_FORMAT = 4,
  RMFN_NUMERIC = 5,
  RMFN_STATE = 6,
  RMFN_BUSY = 7,
  RMFN_BUFFER_TOO_SMALL = 8,
  RMFN_INTERNAL = 9
} rmfn_status;

RMFN_API const char* rmfn_last_error(void);
/* "ok", "invalid_argument", ... */
RMFN_API const char* rmfn_status_name(rmfn_status status);
RMFN_API const char* rmfn_version(void);

/* Text outputs use the same convention: `needed` receives the size including
 * the terminating NUL; RMFN_BUFFER_TOO_SMALL if `capacity` is less. `buffer`
 * may be NULL when `capacity` is 0. */

/* ---- run configuration ---- */

typedef struct rmfn_run_config rmfn_run_config;

/* Built-in defaults. */
RMFN_API rmfn_status rmfn_run_config_create(rmfn_run_config** out);
RMFN_API rmfn_status rmfn_run_config_load(const char* path, rmfn_run_config** out);
RMFN_API rmfn_status rmfn_run_config_parse(const char* text, rmfn_run_config** out);
/* key is "section.key", e.g. "train.epochs". */
RMFN_API rmfn_status rmfn_run_config_set(rmfn_run_config* config, const char* key, const char* value);
RMFN_API rmfn_status rmfn_run_config_get(const rmfn_run_config* config, const char* key, char* buffer,
                                         size_t capacity, size_t* needed);
RMFN_API rmfn_status rmfn_run_config_format(const rmfn_run_config* config, char* buffer, size_t capacity,
                                            size_t* needed);
/* check_data: also validate the [data] section (only gen uses it). */
RMFN_API rmfn_status rmfn_run_config_validate(const rmfn_run_config* config, int check_data);
RMFN_API void rmfn_run_config_free(rmfn_run_config* config);

/* ---- commands ---- */

typedef struct rmfn_epoch {
  size_t epoch;
  double train_loss;
  double train_acc;
  int has_test_acc;
  double test_acc;
} rmfn_epoch;

typedef void (*rmfn_epoch_callback)(const rmfn_epoch* epoch, void* user);

typedef struct rmfn_metrics {
  size_t tp, fp, tn, fn;
  /* A flag is 0 when the fraction's denominator is zero. */
  int has_precision, has_recall, has_f1, has_accuracy;
  double precision, recall, f1, accuracy;
  char model[32];
} rmfn_metrics;

RMFN_API rmfn_status rmfn_cmd_gen(const rmfn_run_config* config);
/* callback may be NULL. */
RMFN_API rmfn_status rmfn_cmd_train(const rmfn_run_config* config, rmfn_epoch_callback callback, void* user);
/* checkpoint NULL or "" means paths.checkpoint. */
RMFN_API rmfn_status rmfn_cmd_eval(const rmfn_run_config* config, const char* checkpoint, rmfn_metrics* out);
RMFN_API rmfn_status rmfn_metrics_from_counts(size_t tp, size_t fp, size_t tn, size_t fn, rmfn_metrics* out);
/* Header line plus one row per entry, percentages to one decimal. */
RMFN_API rmfn_status rmfn_format_metrics_table(const rmfn_metrics* rows, size_t count, char* buffer,
                                               size_t capacity, size_t* needed);

RMFN_API rmfn_status rmfn_validate_overlap(long grid, long region_side, long overlap, long input_side,
                                           int* valid, long* residual);
RMFN_API rmfn_status rmfn_geometry_report(long g1, long l1, long g2, long l2, long eps, long l0, char* buffer,
                                          size_t capacity, size_t* needed);
RMFN_API rmfn_status rmfn_cmd_heatmap(const char* checkpoint, const char* image_pgm, const char* out_pgm,
                                      double weight);

/* ---- models ---- */

typedef struct rmfn_model rmfn_model;

/* Fresh model for the config's [model] section, initialized from train.seed. */
RMFN_API rmfn_status rmfn_model_create(const rmfn_run_config* config, rmfn_model** out);
RMFN_API rmfn_status rmfn_model_load(const char* checkpoint, rmfn_model** out);
RMFN_API rmfn_status rmfn_model_save(const rmfn_model* model, const char* checkpoint);
/* channels x side x side */
RMFN_API rmfn_status rmfn_model_input_shape(const rmfn_model* model, size_t* channels, size_t* side);
RMFN_API rmfn_status rmfn_model_parameter_count(const rmfn_model* model, size_t* count);
/* Inference pass. `image` holds channels*side*side values in row-major order.
 * decision is 0 (normal) or 1 (pancreatitis); any output pointer may be NULL. */
RMFN_API rmfn_status rmfn_model_forward(const rmfn_model* model, const double* image, size_t length,
                                        double logits[2], int* decision);
RMFN_API void rmfn_model_free(rmfn_model* model);

#ifdef __cplusplus
}
#endif

#endif
