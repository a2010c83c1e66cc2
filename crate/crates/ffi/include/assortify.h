#ifndef ASSORTIFY_H
#define ASSORTIFY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum AssortifyStatus {
  ASSORTIFY_STATUS_OK = 0,
  ASSORTIFY_STATUS_NULL_POINTER = 1,
  ASSORTIFY_STATUS_INVALID_ARGUMENT = 2,
  ASSORTIFY_STATUS_IO = 3,
  ASSORTIFY_STATUS_SCHEMA = 4,
  ASSORTIFY_STATUS_DIMENSION_MISMATCH = 5,
  ASSORTIFY_STATUS_NUMERIC = 6,
  ASSORTIFY_STATUS_PANIC = 7,
  ASSORTIFY_STATUS_OTHER = 8,
} AssortifyStatus;

// Metric mode selector for [`assortify_metric_fit`].
typedef enum AssortifyMetricMode {
  ASSORTIFY_METRIC_MODE_INVERSE_COVARIANCE = 0,
  ASSORTIFY_METRIC_MODE_COVARIANCE = 1,
  ASSORTIFY_METRIC_MODE_IDENTITY = 2,
} AssortifyMetricMode;

// Fitted compatibility metric.
typedef struct AssortifyMetric AssortifyMetric;

// Trained topic model loaded from a model directory.
typedef struct AssortifyModel AssortifyModel;

// Click sessions indexed for Jaccard queries.
typedef struct AssortifySessions AssortifySessions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Last error message on this thread, or null if none. The pointer stays
// valid until the next failing call on the same thread.
const char *assortify_last_error(void);

// Library version as a static NUL-terminated string.
const char *assortify_version(void);

// Fits a metric from `n` row-major vectors of length `dim`.
//
// # Safety
// `vectors` must point to `n * dim` doubles; `out` must be writable.
enum AssortifyStatus assortify_metric_fit(const double *vectors,
                                          size_t n,
                                          size_t dim,
                                          enum AssortifyMetricMode mode,
                                          double lambda,
                                          struct AssortifyMetric **out);

// Loads `metric.json`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum AssortifyStatus assortify_metric_load(const char *path, struct AssortifyMetric **out);

// # Safety
// `metric` must come from this library; `out` must be writable.
enum AssortifyStatus assortify_metric_dim(const struct AssortifyMetric *metric, size_t *out);

// `(x − y) M (x − y)ᵀ` for two vectors of length `len`.
//
// # Safety
// `x` and `y` must point to `len` doubles; `out` must be writable.
enum AssortifyStatus assortify_metric_distance(const struct AssortifyMetric *metric,
                                               const double *x,
                                               const double *y,
                                               size_t len,
                                               double *out);

// # Safety
// `metric` must come from this library and not be used afterwards. Null is ignored.
void assortify_metric_free(struct AssortifyMetric *metric);

// Loads a model directory written by `assortify train`.
//
// # Safety
// `dir` must be a NUL-terminated string; `out` must be writable.
enum AssortifyStatus assortify_model_load(const char *dir, struct AssortifyModel **out);

// # Safety
// `model` must come from this library; `out` must be writable.
enum AssortifyStatus assortify_model_num_topics(const struct AssortifyModel *model, size_t *out);

// Fold-in θ for a product given its visual word ids and text word ids.
// Either list may be empty; a modality the model was not trained on must
// be empty. Writes `num_topics` values to `theta_out`.
//
// # Safety
// Arrays must hold the stated number of elements; `theta_out` must hold
// `theta_len` doubles.
enum AssortifyStatus assortify_model_infer_theta(const struct AssortifyModel *model,
                                                 const uint32_t *visual,
                                                 size_t n_visual,
                                                 const uint32_t *text,
                                                 size_t n_text,
                                                 size_t sweeps,
                                                 uint64_t seed,
                                                 double *theta_out,
                                                 size_t theta_len);

// # Safety
// `model` must come from this library and not be used afterwards. Null is ignored.
void assortify_model_free(struct AssortifyModel *model);

// Loads click sessions from a `sessions.jsonl` file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum AssortifyStatus assortify_sessions_load(const char *path, struct AssortifySessions **out);

// Co-click Jaccard of two product ids; 0 when neither was ever clicked.
//
// # Safety
// `a` and `b` must be NUL-terminated strings; `out` must be writable.
enum AssortifyStatus assortify_sessions_jaccard(const struct AssortifySessions *sessions,
                                                const char *a,
                                                const char *b,
                                                double *out);

// # Safety
// `sessions` must come from this library and not be used afterwards. Null is ignored.
void assortify_sessions_free(struct AssortifySessions *sessions);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ASSORTIFY_H */
