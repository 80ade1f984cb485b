#ifndef MBVGE_H
#define MBVGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MbvgeStatus {
  MBVGE_STATUS_OK = 0,
  MBVGE_STATUS_NULL_POINTER = 1,
  MBVGE_STATUS_INVALID_PARAMETER = 2,
  MBVGE_STATUS_INVALID_DATA = 3,
  /**
   * Every observation is a tie; the model cannot be fitted.
   */
  MBVGE_STATUS_MODEL_INADEQUACY = 4,
  MBVGE_STATUS_NUMERIC = 5,
  MBVGE_STATUS_PANIC = 6,
} MbvgeStatus;

/**
 * The result of a fit.
 */
typedef struct MbvgeFit MbvgeFit;

/**
 * A mixture model.
 */
typedef struct MbvgeModel MbvgeModel;

typedef struct MbvgeDependence {
  double kendall_tau;
  double spearman_rho;
  double tail_lower;
  double tail_upper;
  /**
   * Published closed forms, unverified and possibly out of range.
   */
  double kendall_tau_verbatim;
  double spearman_rho_verbatim;
  double tail_upper_verbatim;
} MbvgeDependence;

typedef struct MbvgeFitOptions {
  double rel_tol;
  uintptr_t max_iter;
  double fp_tol;
  uintptr_t fp_max_iter;
  double fp_damping;
  /**
   * 0: random starting values, 1: moment-based starting values.
   */
  uint32_t init;
  double tie_tol;
  uint64_t seed;
} MbvgeFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *mbvge_last_error_message(void);

/**
 * # Safety
 * `params` must point to nine readable doubles and `out` must be writable.
 */
enum MbvgeStatus mbvge_model_new(const double *params, struct MbvgeModel **out);

/**
 * # Safety
 * `model` must come from [`mbvge_model_new`] and not be used afterwards.
 */
void mbvge_model_free(struct MbvgeModel *model);

/**
 * Log density at `(x1, x2)`; exact ties use the diagonal density.
 *
 * # Safety
 * `model` must be a live model and `out` writable.
 */
enum MbvgeStatus mbvge_model_log_density(const struct MbvgeModel *model,
                                         double x1,
                                         double x2,
                                         double *out);

/**
 * Joint CDF at `(x1, x2)`.
 *
 * # Safety
 * `model` must be a live model and `out` writable.
 */
enum MbvgeStatus mbvge_model_cdf(const struct MbvgeModel *model, double x1, double x2, double *out);

/**
 * Probability of a tie, `P(X1 = X2)`.
 *
 * # Safety
 * `model` must be a live model and `out` writable.
 */
enum MbvgeStatus mbvge_model_singular_mass(const struct MbvgeModel *model, double *out);

/**
 * Draw `n` pairs. The stream is the same as the command-line `sample` with
 * the same seed. `labels` may be null.
 *
 * # Safety
 * `x1` and `x2` must have room for `n` doubles and `labels`, if not null,
 * for `n` bytes.
 */
enum MbvgeStatus mbvge_model_sample(const struct MbvgeModel *model,
                                    uint64_t seed,
                                    uintptr_t n,
                                    double *x1,
                                    double *x2,
                                    uint8_t *labels);

/**
 * Rank correlations and tail indices of the copula of the mixture
 * distribution.
 *
 * # Safety
 * `model` must be a live model and `out` writable.
 */
enum MbvgeStatus mbvge_dependence(const struct MbvgeModel *model, struct MbvgeDependence *out);

/**
 * Default fit options.
 */
struct MbvgeFitOptions mbvge_fit_options_default(void);

/**
 * Fit the mixture to `n` pairs. `options` may be null for the defaults.
 *
 * # Safety
 * `x1` and `x2` must point to `n` readable doubles, `options` (if not null)
 * to a valid struct, and `out` must be writable.
 */
enum MbvgeStatus mbvge_fit(const double *x1,
                           const double *x2,
                           uintptr_t n,
                           const struct MbvgeFitOptions *options,
                           struct MbvgeFit **out);

/**
 * # Safety
 * `fit` must come from [`mbvge_fit`] and not be used afterwards.
 */
void mbvge_fit_free(struct MbvgeFit *fit);

/**
 * The nine estimates.
 *
 * # Safety
 * `fit` must be live and `out` must have room for nine doubles.
 */
enum MbvgeStatus mbvge_fit_estimates(const struct MbvgeFit *fit, double *out);

/**
 * Final log-likelihood, iteration count and convergence flag. Any of the
 * output pointers may be null.
 *
 * # Safety
 * `fit` must be live; non-null outputs must be writable.
 */
enum MbvgeStatus mbvge_fit_info(const struct MbvgeFit *fit,
                                double *loglik,
                                uintptr_t *iterations,
                                bool *converged);

/**
 * Create a model from the fitted parameters.
 *
 * # Safety
 * `fit` must be live and `out` writable.
 */
enum MbvgeStatus mbvge_fit_model(const struct MbvgeFit *fit, struct MbvgeModel **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MBVGE_H */
