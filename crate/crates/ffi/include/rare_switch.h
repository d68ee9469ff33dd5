#ifndef RARE_SWITCH_H
#define RARE_SWITCH_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RsStatus {
  RS_STATUS_OK = 0,
  RS_STATUS_NULL_POINTER = 1,
  RS_STATUS_INVALID_ARGUMENT = 2,
  RS_STATUS_DIMENSION_MISMATCH = 3,
  RS_STATUS_NOT_SYMMETRIC = 4,
  RS_STATUS_NOT_POSITIVE_DEFINITE = 5,
  RS_STATUS_BOUND_VACUOUS = 6,
  RS_STATUS_STREAM_FINISHED = 7,
  RS_STATUS_NOT_FOUND = 8,
  RS_STATUS_INTERNAL = 9,
} RsStatus;

typedef enum RsRuleKind {
  RS_RULE_KIND_DETERMINANT = 0,
  RS_RULE_KIND_RAYLEIGH = 1,
  RS_RULE_KIND_RAYLEIGH_LOEWNER_FORM = 2,
} RsRuleKind;

typedef enum RsNoiseKind {
  RS_NOISE_KIND_NONE = 0,
  RS_NOISE_KIND_GAUSSIAN_ORTHOGONAL_RESCALED = 1,
  RS_NOISE_KIND_ADVERSARIAL_DIAGONAL = 2,
} RsNoiseKind;

typedef enum RsSearchMode {
  RS_SEARCH_MODE_ANALYTIC = 0,
  RS_SEARCH_MODE_GRID = 1,
} RsSearchMode;

/**
 * Opaque switching stream.
 */
typedef struct RsStream RsStream;

/**
 * Parameters of a switching stream.
 */
typedef struct RsStreamParams {
  size_t dim;
  size_t horizon;
  double lambda;
  double eta;
  /**
   * Cap `L` on action norms.
   */
  double action_norm_cap;
  double alpha;
  enum RsRuleKind rule;
  enum RsNoiseKind noise;
  double sigma;
  uint64_t seed;
} RsStreamParams;

/**
 * Outcome of one stream step.
 */
typedef struct RsStepRecord {
  uint64_t t;
  /**
   * Last update time, `t` itself if this step switched.
   */
  uint64_t tau;
  double statistic;
  bool switched;
} RsStepRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null after a
 * successful call. Valid until the next call on this thread.
 */
const char *rs_last_error_message(void);

/**
 * `λ_max(B^{-1/2} A B^{-1/2})` for symmetric `A` and positive definite `B`.
 *
 * # Safety
 * `a` and `b` must point to `dim * dim` doubles; `out` must be writable.
 */
enum RsStatus rs_gen_rayleigh_max(size_t dim, const double *a, const double *b, double *out);

/**
 * `ln det A` for positive definite `A`.
 *
 * # Safety
 * `a` must point to `dim * dim` doubles; `out` must be writable.
 */
enum RsStatus rs_log_det(size_t dim, const double *a, double *out);

/**
 * Whether `A ⪰ B`, i.e. `λ_min(A − B) ≥ −tol`. A negative `tol` selects
 * the default tolerance `1e-10 (1 + ‖A‖ + ‖B‖)`.
 *
 * # Safety
 * `a` and `b` must point to `dim * dim` doubles; `out` must be writable.
 */
enum RsStatus rs_loewner_dominates(size_t dim,
                                   const double *a,
                                   const double *b,
                                   double tol,
                                   bool *out);

/**
 * Bound on the number of updates after the first one. Fails with
 * `BoundVacuous` when `alpha <= c_rho`.
 *
 * # Safety
 * `params` must be readable and `out` writable.
 */
enum RsStatus rs_update_count_bound(const struct RsStreamParams *params, double *out);

/**
 * Creates a stream; release it with [`rs_stream_free`].
 *
 * # Safety
 * `params` must be readable and `out` writable.
 */
enum RsStatus rs_stream_new(const struct RsStreamParams *params, struct RsStream **out);

/**
 * Evaluates the rule at the next step, then absorbs action `x` of length
 * `len`. On failure the stream is left unchanged.
 *
 * # Safety
 * `stream` must come from [`rs_stream_new`]; `x` must point to `len`
 * doubles; `out` must be writable.
 */
enum RsStatus rs_stream_step(struct RsStream *stream,
                             const double *x,
                             size_t len,
                             struct RsStepRecord *out);

/**
 * Updates so far, including the one at step 1.
 *
 * # Safety
 * `stream` must come from [`rs_stream_new`]; `out` must be writable.
 */
enum RsStatus rs_stream_update_count(const struct RsStream *stream, size_t *out);

/**
 * # Safety
 * `stream` must come from [`rs_stream_new`] and not be used afterwards.
 * Null is ignored.
 */
void rs_stream_free(struct RsStream *stream);

/**
 * Verified counterexample as a text block with full-precision matrices.
 * Fails with `NotFound` when none exists (e.g. `eta = 0`). Release the
 * string with [`rs_string_free`].
 *
 * # Safety
 * `out` must be writable.
 */
enum RsStatus rs_counterexample_text(double alpha,
                                     double eta,
                                     double lambda,
                                     enum RsSearchMode mode,
                                     char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is
 * ignored.
 */
void rs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RARE_SWITCH_H */
