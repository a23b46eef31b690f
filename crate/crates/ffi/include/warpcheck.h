#ifndef WARPCHECK_H
#define WARPCHECK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum WcStatus {
  WC_STATUS_OK = 0,
  WC_STATUS_NULL_POINTER = 1,
  WC_STATUS_INVALID_UTF8 = 2,
  /**
   * Bad expression, chart, identifier or parameter combination.
   */
  WC_STATUS_INVALID_ARGUMENT = 3,
  /**
   * Domain error, degenerate metric, singular system or non-finite value.
   */
  WC_STATUS_NUMERIC = 4,
  WC_STATUS_NO_CONVERGENCE = 5,
  WC_STATUS_PANIC = 6,
} WcStatus;

/**
 * A catalog metric with its closed-form curvature and `u` field.
 */
typedef struct WcCatalogEntry WcCatalogEntry;

/**
 * A diagonal 2D metric over a chart.
 */
typedef struct WcMetric WcMetric;

typedef struct WcWitness {
  size_t points;
  double min_abs_gap;
  double max_abs_gap;
  double min_u;
  double fraction_exceeding;
  bool pass;
} WcWitness;

typedef struct WcSolveSummary {
  size_t iterations;
  double final_residual;
  /**
   * Max nodal error against the entry's `u` field.
   */
  double max_error;
  bool converged;
} WcSolveSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *wc_version(void);

/**
 * Message for the last failed call on this thread, or NULL after a
 * successful one. Valid until the next call on the same thread.
 */
const char *wc_last_error(void);

/**
 * Builds `s1 e d var1² + s2 g d var2²` over `[lo[0], hi[0]] × [lo[1], hi[1]]`.
 * A negative sign argument selects `-`, anything else `+`.
 *
 * # Safety
 * String arguments must be NUL-terminated; `lo` and `hi` must point to two
 * doubles each; `out` must be writable.
 */
enum WcStatus wc_metric_new(const char *var1,
                            const char *var2,
                            const char *e,
                            const char *g,
                            int sign1,
                            int sign2,
                            const double *lo,
                            const double *hi,
                            bool periodic,
                            struct WcMetric **out_metric);

/**
 * # Safety
 * `metric` must be NULL or a handle from this library not yet freed.
 */
void wc_metric_free(struct WcMetric *metric);

/**
 * Gaussian curvature at `(x, y)`.
 *
 * # Safety
 * `metric` must be a live handle and `out` writable.
 */
enum WcStatus wc_metric_gauss_curvature(const struct WcMetric *metric,
                                        double x,
                                        double y,
                                        double *out_k);

/**
 * Residuals of the case system `tag` ("1a", "1b" or "2b") for the field
 * `u` over the metric's chart. Writes three doubles; the third is 0 for 1b.
 *
 * # Safety
 * `metric` must be a live handle, strings NUL-terminated, and `out`
 * writable for three doubles.
 */
enum WcStatus wc_case_residuals(const struct WcMetric *metric,
                                const char *u,
                                const char *tag,
                                double lambda,
                                double mu,
                                double c,
                                double x,
                                double y,
                                double *out_residuals);

/**
 * Catalog entry `id` ("eq11", "eq12", "case1b_metric" or "eq20").
 * `lambda` is used by eq20 and `big_a` by case1b_metric.
 *
 * # Safety
 * `id` must be NUL-terminated and `out_entry` writable.
 */
enum WcStatus wc_catalog_entry_new(const char *id,
                                   double lambda,
                                   double big_a,
                                   struct WcCatalogEntry **out_entry);

/**
 * # Safety
 * `entry` must be NULL or a handle from this library not yet freed.
 */
void wc_catalog_entry_free(struct WcCatalogEntry *entry);

/**
 * A new metric handle holding a copy of the entry's metric.
 *
 * # Safety
 * `entry` must be a live handle and `out_metric` writable.
 */
enum WcStatus wc_catalog_entry_metric(const struct WcCatalogEntry *entry,
                                      struct WcMetric **out_metric);

/**
 * Closed-form curvature of the entry at `(x, y)`.
 *
 * # Safety
 * `entry` must be a live handle and `out` writable.
 */
enum WcStatus wc_catalog_entry_closed_k(const struct WcCatalogEntry *entry,
                                        double x,
                                        double y,
                                        double *out_k);

/**
 * The entry's `u` field at `(x, y)`.
 *
 * # Safety
 * `entry` must be a live handle and `out` writable.
 */
enum WcStatus wc_catalog_entry_u(const struct WcCatalogEntry *entry,
                                 double x,
                                 double y,
                                 double *out_u);

/**
 * Curvature gap `K + u` over an `n1 × n2` grid of the entry's domain.
 *
 * # Safety
 * `entry` must be a live handle and `out` writable.
 */
enum WcStatus wc_catalog_entry_witness(const struct WcCatalogEntry *entry,
                                       size_t n1,
                                       size_t n2,
                                       double tol,
                                       struct WcWitness *out_witness);

/**
 * Solves `Δf + a f² + b f = 0` on an `n1 × n2` grid over the entry's
 * domain with the first axis cut to `[lo1, hi1]`, with Dirichlet data from
 * the entry's `u` field, and compares with it.
 * Returns `NoConvergence` with the summary filled when Newton stalls.
 *
 * # Safety
 * `entry` must be a live handle and `out` writable.
 */
enum WcStatus wc_solve_entry(const struct WcCatalogEntry *entry,
                             double a,
                             double b,
                             double lo1,
                             double hi1,
                             size_t n1,
                             size_t n2,
                             double tol,
                             size_t max_iter,
                             struct WcSolveSummary *out_summary);

/**
 * The two constant warps of the 2b branch, `(11 ± √57) λ / (8 c)`.
 *
 * # Safety
 * Both output pointers must be writable.
 */
enum WcStatus wc_case2b_constant_f(double lambda, double c, double *out_plus, double *out_minus);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WARPCHECK_H */
