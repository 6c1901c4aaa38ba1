#ifndef SVDINSTN_H
#define SVDINSTN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SvdStatus {
  SVD_STATUS_OK = 0,
  SVD_STATUS_INVALID_ARGUMENT = 1,
  SVD_STATUS_NUMERICAL = 2,
  SVD_STATUS_INVARIANT = 3,
  SVD_STATUS_DEGENERATE_RANK = 4,
  SVD_STATUS_FORMAT = 5,
  SVD_STATUS_IO = 6,
  SVD_STATUS_NULL_POINTER = 7,
  SVD_STATUS_PANIC = 8,
} SvdStatus;

// Opaque fitted network.
typedef struct SvdModel SvdModel;

// Opaque dense tensor.
typedef struct SvdTensor SvdTensor;

// Solver settings. A `data_scale` of zero or less solves on the data as
// given.
typedef struct SvdSolverOptions {
  double gamma;
  double rho;
  double mu;
  double beta;
  double epsilon;
  double tol;
  size_t max_outer;
  size_t inner_admm_iters;
  double data_scale;
} SvdSolverOptions;

typedef struct SvdCompletionOptions {
  struct SvdSolverOptions solver;
  size_t max_iters;
  double tol;
} SvdCompletionOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *svd_last_error_message(void);

// Library version as a static string.
const char *svd_version(void);

struct SvdSolverOptions svd_solver_options_default(void);

struct SvdCompletionOptions svd_completion_options_default(void);

// Copies `order` dims and `∏ dims` entries (first index fastest) into a new
// tensor.
//
// # Safety
// `dims` must point to `order` values and `data` to the product of them.
enum SvdStatus svd_tensor_new(size_t order,
                              const size_t *dims,
                              const double *data,
                              struct SvdTensor **out);

// # Safety
// `path` must be a nul-terminated string.
enum SvdStatus svd_tensor_load(const char *path, struct SvdTensor **out);

// # Safety
// `tensor` must be a live handle and `path` a nul-terminated string.
enum SvdStatus svd_tensor_save(const struct SvdTensor *tensor, const char *path);

// Order of the tensor, or 0 for a null handle.
//
// # Safety
// `tensor` must be null or a live handle.
size_t svd_tensor_order(const struct SvdTensor *tensor);

// Number of entries, or 0 for a null handle.
//
// # Safety
// `tensor` must be null or a live handle.
size_t svd_tensor_len(const struct SvdTensor *tensor);

// Copies the dims into `dims`, which holds `capacity` values.
//
// # Safety
// `tensor` must be a live handle and `dims` writable for `capacity` values.
enum SvdStatus svd_tensor_dims(const struct SvdTensor *tensor, size_t *dims, size_t capacity);

// Copies the entries (first index fastest) into `data`, which holds
// `capacity` values.
//
// # Safety
// `tensor` must be a live handle and `data` writable for `capacity` values.
enum SvdStatus svd_tensor_data(const struct SvdTensor *tensor, double *data, size_t capacity);

// # Safety
// `tensor` must be null or a handle not yet freed.
void svd_tensor_free(struct SvdTensor *tensor);

// Searches a network for `x`. On success `out_model` receives the model and,
// when non-null, `out_report` a JSON report and `out_converged` whether the
// tolerance was reached before the sweep cap.
//
// # Safety
// Handles must be live; out-pointers must be writable or (where noted) null.
enum SvdStatus svd_decompose(const struct SvdTensor *x,
                             const struct SvdSolverOptions *options,
                             struct SvdModel **out_model,
                             char **out_report,
                             bool *out_converged);

// Completes `observed` on the positions where `mask` is nonzero. Observed
// entries of the output equal the input bit for bit.
//
// # Safety
// Handles must be live; `out_tensor` writable; `out_report` and
// `out_converged` writable or null.
enum SvdStatus svd_complete(const struct SvdTensor *observed,
                            const struct SvdTensor *mask,
                            const struct SvdCompletionOptions *options,
                            struct SvdTensor **out_tensor,
                            char **out_report,
                            bool *out_converged);

// # Safety
// `model` must be a live handle and `out` writable.
enum SvdStatus svd_model_evaluate(const struct SvdModel *model, struct SvdTensor **out);

// Order of the model, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t svd_model_order(const struct SvdModel *model);

// Copies the upper triangle of the rank matrix, edges `(0,1), (0,2), …` in
// lexicographic order, into `ranks` (`N(N-1)/2` values).
//
// # Safety
// `model` must be a live handle and `ranks` writable for `capacity` values.
enum SvdStatus svd_model_ranks(const struct SvdModel *model, size_t *ranks, size_t capacity);

// # Safety
// `model` must be a live handle and `path` a nul-terminated string.
enum SvdStatus svd_model_save(const struct SvdModel *model, const char *path);

// # Safety
// `path` must be a nul-terminated string and `out` writable.
enum SvdStatus svd_model_load(const char *path, struct SvdModel **out);

// # Safety
// `model` must be null or a handle not yet freed.
void svd_model_free(struct SvdModel *model);

// Frees a string returned through an out-parameter.
//
// # Safety
// `s` must be null or a string from this library not yet freed.
void svd_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SVDINSTN_H */
