#ifndef DUAL_ALIGN_H
#define DUAL_ALIGN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum DaStatus {
  DA_STATUS_OK = 0,
  DA_STATUS_NULL_POINTER = 1,
  DA_STATUS_DIMENSION = 2,
  DA_STATUS_INVALID_SPEC = 3,
  DA_STATUS_INVALID_PARAMS = 4,
  DA_STATUS_INSUFFICIENT_DATA = 5,
  DA_STATUS_UNSUPPORTED_KERNEL = 6,
  DA_STATUS_CONFIG = 7,
  DA_STATUS_IO = 8,
  DA_STATUS_PANIC = 9,
} DaStatus;

typedef enum DaKernelKind {
  DA_KERNEL_KIND_LINEAR = 0,
  DA_KERNEL_KIND_GAUSSIAN = 1,
} DaKernelKind;

typedef enum DaObjective {
  DA_OBJECTIVE_PRIMAL = 0,
  DA_OBJECTIVE_WGAN = 1,
  /**
   * Dual objective; uses the kernel given in [`DaRunOptions`].
   */
  DA_OBJECTIVE_DUAL = 2,
  /**
   * MMD descent; uses the kernel given in [`DaRunOptions`].
   */
  DA_OBJECTIVE_MMD = 3,
} DaObjective;

typedef enum DaMatcher {
  DA_MATCHER_AFFINE = 0,
  DA_MATCHER_FREE_POINTS = 1,
} DaMatcher;

typedef enum DaRunStatus {
  DA_RUN_STATUS_CONVERGED = 0,
  DA_RUN_STATUS_OSCILLATING = 1,
  DA_RUN_STATUS_DIVERGED = 2,
  DA_RUN_STATUS_MAX_ITERS = 3,
} DaRunStatus;

/**
 * Opaque point set.
 */
typedef struct DaPointSet DaPointSet;

/**
 * Opaque result of an alignment run.
 */
typedef struct DaRun DaRun;

/**
 * Kernel description; `bandwidth` is read only for the Gaussian kernel.
 */
typedef struct DaKernel {
  enum DaKernelKind kind;
  double bandwidth;
} DaKernel;

typedef struct DaSaddleState {
  double x;
  double y;
  double step;
} DaSaddleState;

/**
 * Settings for [`da_run_alignment`]. Start from [`da_run_options_default`].
 */
typedef struct DaRunOptions {
  enum DaObjective objective;
  struct DaKernel kernel;
  enum DaMatcher matcher;
  double lr_theta;
  /**
   * Step size of the adversary: `α` for the dual, the discriminator otherwise.
   */
  double lr_adversary;
  /**
   * Regularization of the discriminator (dual and primal objectives).
   */
  double lambda;
  /**
   * Balance penalty of the dual objective.
   */
  double lambda1;
  size_t iterations;
  size_t trace_every;
  uint64_t seed;
} DaRunOptions;

typedef struct DaTraceRow {
  size_t iteration;
  double objective;
  double disc_accuracy;
  double mean_gap;
  double cov_gap;
} DaTraceRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *da_last_error_message(void);

/**
 * Copies `count * dim` coordinates into a new point set.
 *
 * # Safety
 * `coords` must point to `count * dim` readable doubles; `out` must be writable.
 */
enum DaStatus da_pointset_new(const double *coords,
                              size_t count,
                              size_t dim,
                              struct DaPointSet **out);

/**
 * Draws `count` points from a Gaussian with the given mean (`dim` values) and
 * covariance (`dim * dim`, row-major).
 *
 * # Safety
 * `mean` and `covariance` must hold `dim` and `dim * dim` doubles; `out` must be writable.
 */
enum DaStatus da_pointset_gaussian(const double *mean,
                                   const double *covariance,
                                   size_t dim,
                                   size_t count,
                                   uint64_t seed,
                                   struct DaPointSet **out);

/**
 * # Safety
 * `set` must be null or a handle from this library that has not been freed.
 */
void da_pointset_free(struct DaPointSet *set);

/**
 * Number of points; 0 for a null handle.
 *
 * # Safety
 * `set` must be null or a live handle.
 */
size_t da_pointset_len(const struct DaPointSet *set);

/**
 * Dimension; 0 for a null handle.
 *
 * # Safety
 * `set` must be null or a live handle.
 */
size_t da_pointset_dim(const struct DaPointSet *set);

/**
 * Copies the coordinates into `out`, which must hold `capacity >= len * dim` doubles.
 *
 * # Safety
 * `set` must be a live handle; `out` must point to `capacity` writable doubles.
 */
enum DaStatus da_pointset_coords(const struct DaPointSet *set, double *out, size_t capacity);

/**
 * `k(x, y)` for two `dim`-vectors.
 *
 * # Safety
 * `x` and `y` must hold `dim` doubles; `out` must be writable.
 */
enum DaStatus da_kernel_eval(struct DaKernel kernel,
                             const double *x,
                             const double *y,
                             size_t dim,
                             double *out);

/**
 * Standard (biased) MMD estimate between two point sets.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` must be writable.
 */
enum DaStatus da_mmd_distance(struct DaKernel kernel,
                              const struct DaPointSet *a,
                              const struct DaPointSet *b,
                              double *out);

/**
 * Dual objective at the weights `alpha` (`len(a) + len(b)` values, source
 * first), with balance penalty `lambda1` and projected box handling.
 *
 * # Safety
 * `a` and `b` must be live handles; `alpha` must hold `alpha_len` doubles; `out` must be writable.
 */
enum DaStatus da_dual_distance(struct DaKernel kernel,
                               const struct DaPointSet *a,
                               const struct DaPointSet *b,
                               const double *alpha,
                               size_t alpha_len,
                               double lambda,
                               double lambda1,
                               double *out);

/**
 * Regularized logistic log-likelihood of `wᵀx + bias` on the labelled union
 * (source `+1`, target `-1`).
 *
 * # Safety
 * `a` and `b` must be live handles; `w` must hold `dim` doubles; `out` must be writable.
 */
enum DaStatus da_primal_distance(const struct DaPointSet *a,
                                 const struct DaPointSet *b,
                                 const double *w,
                                 size_t dim,
                                 double bias,
                                 double lambda,
                                 double *out);

/**
 * One simultaneous gradient step on `min_x max_y xy`, in place.
 *
 * # Safety
 * `state` must point to a writable [`DaSaddleState`].
 */
enum DaStatus da_saddle_step(struct DaSaddleState *state);

/**
 * Default run settings: dual objective, linear kernel, affine matcher,
 * rates 0.002, `lambda = 10`, `lambda1 = 1`, 5000 iterations, a row every 10.
 */
struct DaRunOptions da_run_options_default(void);

/**
 * Aligns `b` to `a`. A diverged run is still a successful call; check
 * [`da_run_status`].
 *
 * # Safety
 * `a` and `b` must be live handles; `options` must be readable; `out` must be writable.
 */
enum DaStatus da_run_alignment(const struct DaPointSet *a,
                               const struct DaPointSet *b,
                               const struct DaRunOptions *options,
                               struct DaRun **out);

/**
 * # Safety
 * `run` must be null or a live handle.
 */
void da_run_free(struct DaRun *run);

/**
 * Final status; `DA_RUN_STATUS_DIVERGED` for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
enum DaRunStatus da_run_status(const struct DaRun *run);

/**
 * Number of trace rows; 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
size_t da_run_trace_len(const struct DaRun *run);

/**
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum DaStatus da_run_trace_row(const struct DaRun *run, size_t index, struct DaTraceRow *out);

/**
 * Number of matcher parameters; 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
size_t da_run_matcher_len(const struct DaRun *run);

/**
 * Copies the final matcher parameters (affine: matrix row-major then
 * translation; free points: offsets row-major).
 *
 * # Safety
 * `run` must be a live handle; `out` must hold `capacity` writable doubles.
 */
enum DaStatus da_run_matcher(const struct DaRun *run, double *out, size_t capacity);

/**
 * Writes the trace as CSV (`iter,objective,disc_acc,mean_gap,cov_gap`).
 *
 * # Safety
 * `run` must be a live handle; `path` must be a NUL-terminated UTF-8 string.
 */
enum DaStatus da_run_write_trace_csv(const struct DaRun *run, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DUAL_ALIGN_H */
