#ifndef SCRAPFLOW_H
#define SCRAPFLOW_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a call.
 */
typedef enum SfStatus {
  SF_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  SF_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  SF_STATUS_INVALID_UTF8 = 2,
  /**
   * A file could not be opened or read.
   */
  SF_STATUS_IO = 3,
  /**
   * Input data did not match the expected layout.
   */
  SF_STATUS_PARSE = 4,
  /**
   * An argument was outside its valid range.
   */
  SF_STATUS_DOMAIN = 5,
  /**
   * Inconsistent configuration.
   */
  SF_STATUS_CONFIG = 6,
  /**
   * The design matrix is rank deficient.
   */
  SF_STATUS_SINGULAR = 7,
  /**
   * Fewer observations than regressors.
   */
  SF_STATUS_INSUFFICIENT_DATA = 8,
  /**
   * An input that must not be empty was.
   */
  SF_STATUS_EMPTY = 9,
  /**
   * An internal error; please report it.
   */
  SF_STATUS_PANIC = 10,
} SfStatus;

/**
 * Empirical distribution of a sample.
 */
typedef struct SfEcdf SfEcdf;

/**
 * A windowed, directed trade network.
 */
typedef struct SfNetwork SfNetwork;

/**
 * A fitted no-intercept least-squares model.
 */
typedef struct SfRegression SfRegression;

/**
 * Company count implied by a planned capacity.
 */
typedef struct SfCompanyEstimate {
  /**
   * planned / coefficient.
   */
  double point;
  /**
   * `point` rounded half up.
   */
  uint64_t rounded;
  /**
   * Mean over the coefficient draws.
   */
  double mean;
  /**
   * Standard deviation over the coefficient draws.
   */
  double sd;
} SfCompanyEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or NULL.
 *
 * The pointer stays valid until the next call into this library from the
 * same thread; do not free it.
 */
const char *sf_last_error(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer returned by this library that has not been
 * freed yet.
 */
void sf_string_free(char *s);

/**
 * Disparity-filter significance of an edge carrying share `p` of a node's
 * strength, where the node has `k` edges in that direction.
 *
 * # Safety
 * `out` must be NULL or valid for writes.
 */
enum SfStatus sf_disparity_alpha(double p, size_t k, double *out);

/**
 * Read a trade flow file (columns t,i,j,k,v,q), keep commodity codes starting
 * with `prefix`, and average flows over the years `start_year..=end_year`.
 *
 * # Safety
 * `path` and `prefix` must be NUL-terminated strings; `out` must be valid for
 * writes.
 */
enum SfStatus sf_network_from_csv(const char *path,
                                  const char *prefix,
                                  int32_t start_year,
                                  int32_t end_year,
                                  struct SfNetwork **out);

/**
 * # Safety
 * `network` must be NULL or a handle that has not been freed yet.
 */
void sf_network_free(struct SfNetwork *network);

/**
 * # Safety
 * `network` must be a live handle; `out` must be valid for writes.
 */
enum SfStatus sf_network_edge_count(const struct SfNetwork *network, size_t *out);

/**
 * Sum of all edge weights (tonnes per year).
 *
 * # Safety
 * `network` must be a live handle; `out` must be valid for writes.
 */
enum SfStatus sf_network_total_weight(const struct SfNetwork *network, double *out);

/**
 * New network holding the edges significant at level `alpha` at either
 * endpoint.
 *
 * # Safety
 * `network` must be a live handle; `out` must be valid for writes.
 */
enum SfStatus sf_network_backbone(const struct SfNetwork *network,
                                  double alpha,
                                  struct SfNetwork **out);

/**
 * Edge list as CSV (exporter,importer,tonnes_per_year); free the result with
 * [`sf_string_free`].
 *
 * # Safety
 * `network` must be a live handle; `out` must be valid for writes.
 */
enum SfStatus sf_network_to_csv(const struct SfNetwork *network, char **out);

/**
 * Fit `y = X b` without intercept. `x` is row-major with `n_rows` rows and
 * `n_cols` columns; `robust` selects heteroskedasticity-robust (HC1)
 * standard errors.
 *
 * # Safety
 * `x` must point to `n_rows * n_cols` values, `y` to `n_rows` values; `out`
 * must be valid for writes.
 */
enum SfStatus sf_regression_fit(const double *x,
                                const double *y,
                                size_t n_rows,
                                size_t n_cols,
                                bool robust,
                                struct SfRegression **out);

/**
 * # Safety
 * `fit` must be NULL or a handle that has not been freed yet.
 */
void sf_regression_free(struct SfRegression *fit);

/**
 * Estimate, standard error, t statistic and two-sided p-value of
 * coefficient `index`. Any of the out pointers may be NULL.
 *
 * # Safety
 * `fit` must be a live handle; non-NULL out pointers must be valid for writes.
 */
enum SfStatus sf_regression_coefficient(const struct SfRegression *fit,
                                        size_t index,
                                        double *estimate,
                                        double *std_error,
                                        double *t_stat,
                                        double *p_value);

/**
 * Uncentered R² and its adjusted value. Either out pointer may be NULL.
 *
 * # Safety
 * `fit` must be a live handle; non-NULL out pointers must be valid for writes.
 */
enum SfStatus sf_regression_r2(const struct SfRegression *fit, double *r2, double *adjusted_r2);

/**
 * Prediction for one row of `n_values` regressor values.
 *
 * # Safety
 * `fit` must be a live handle, `values` must point to `n_values` values and
 * `out` must be valid for writes.
 */
enum SfStatus sf_regression_predict(const struct SfRegression *fit,
                                    const double *values,
                                    size_t n_values,
                                    double *out);

/**
 * # Safety
 * `values` must point to `n` values; `out` must be valid for writes.
 */
enum SfStatus sf_ecdf_new(const double *values, size_t n, struct SfEcdf **out);

/**
 * # Safety
 * `cdf` must be NULL or a handle that has not been freed yet.
 */
void sf_ecdf_free(struct SfEcdf *cdf);

/**
 * Fraction of sample values `<= x`.
 *
 * # Safety
 * `cdf` must be a live handle; `out` must be valid for writes.
 */
enum SfStatus sf_ecdf_cdf(const struct SfEcdf *cdf, double x, double *out);

/**
 * Smallest sample value whose cumulative share reaches `u`, for `u` in
 * [0, 1).
 *
 * # Safety
 * `cdf` must be a live handle; `out` must be valid for writes.
 */
enum SfStatus sf_ecdf_inverse(const struct SfEcdf *cdf, double u, double *out);

/**
 * Additional companies implied by `planned_kt` of new capacity, given a
 * per-firm coefficient with its standard deviation, using `draws` seeded
 * coefficient draws for the spread.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SfStatus sf_additional_companies(double planned_kt,
                                      double coefficient,
                                      double coefficient_sd,
                                      size_t draws,
                                      uint64_t seed,
                                      struct SfCompanyEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCRAPFLOW_H */
