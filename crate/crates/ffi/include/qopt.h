#ifndef QOPT_H
#define QOPT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes mirroring the CLI exit codes.
 */
typedef enum QoptStatus {
  Ok = 0,
  /**
   * Unexpected internal failure (a caught panic).
   */
  Internal = 1,
  Argument = 2,
  Domain = 3,
  Resource = 4,
  Consistency = 5,
} QoptStatus;

/**
 * Opaque model handle.
 */
typedef struct QoptModel QoptModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the most recent error message on this thread into `buf`
 * (NUL-terminated, truncated to `cap`). Returns the full message length.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes, or be null (query mode).
 */
uintptr_t qopt_last_error(char *buf, uintptr_t cap);

/**
 * Parses a model from its JSON description.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum QoptStatus qopt_model_from_json(const char *json, struct QoptModel **out);

/**
 * Loads a built-in preset model (`p1`..`p6`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum QoptStatus qopt_model_preset(const char *name, struct QoptModel **out);

/**
 * Frees a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must be a pointer previously returned by a constructor, or null.
 */
void qopt_model_free(struct QoptModel *model);

/**
 * Number of coordinates of the model, or 0 for a null handle.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
uintptr_t qopt_model_dimension(const struct QoptModel *model);

/**
 * Evaluates the exponent `b` at a lattice index of length `len`.
 *
 * # Safety
 * `nu` must point to `len` entries; `out` must be valid.
 */
enum QoptStatus qopt_eval_b(const struct QoptModel *model,
                            const uint32_t *nu,
                            uintptr_t len,
                            double *out);

/**
 * `sum over all indices of e^{-b}` (without the prefactor).
 *
 * # Safety
 * `out` must be valid.
 */
enum QoptStatus qopt_total_sum(const struct QoptModel *model, double tol, double *out);

/**
 * Exact truncation tail after the quasi-optimal set of cardinality `m`.
 *
 * # Safety
 * `tail` must be valid; `err_bound` may be null.
 */
enum QoptStatus qopt_exact_tail(const struct QoptModel *model,
                                uint64_t m,
                                double tol,
                                double *tail,
                                double *err_bound);

/**
 * Number of lattice indices with `b <= tau`.
 *
 * # Safety
 * `out` must be valid.
 */
enum QoptStatus qopt_superlevel_count(const struct QoptModel *model, double tau, uint64_t *out);

/**
 * Builds the quasi-optimal set of cardinality `m`. `indices` receives the
 * members row-major (`m * dimension` entries, order (b, |nu|, lex));
 * `b_values` receives `m` entries. Either may be null to skip.
 *
 * # Safety
 * Non-null output buffers must have the stated capacities.
 */
enum QoptStatus qopt_build_quasi_optimal(const struct QoptModel *model,
                                         uint64_t m,
                                         uint32_t *indices,
                                         double *b_values);

/**
 * Analytic limiting-set volume, where the family has one.
 *
 * # Safety
 * `out` must be valid.
 */
enum QoptStatus qopt_volume_analytic(const struct QoptModel *model, double *out);

/**
 * Asymptotic upper tail estimate (set `relaxed` nonzero for the
 * `(N+1)/2`-weighted variant).
 *
 * # Safety
 * `out` must be valid.
 */
enum QoptStatus qopt_upper_asymptotic(uint64_t m,
                                      uint32_t n,
                                      double volp,
                                      double epsilon,
                                      int32_t relaxed,
                                      double *out);

/**
 * Asymptotic lower tail estimate.
 *
 * # Safety
 * `out` must be valid.
 */
enum QoptStatus qopt_lower_asymptotic(uint64_t m, uint32_t n, double volp, uint32_t q, double *out);

/**
 * Negative-order polylogarithm `Li_{-n}(z)` for `0 < z < 1`.
 *
 * # Safety
 * `out` must be valid.
 */
enum QoptStatus qopt_polylog_neg(uint32_t n, double z, double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* QOPT_H */
