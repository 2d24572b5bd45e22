#ifndef MODELSPACE_H
#define MODELSPACE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MsPriorFamily {
  /**
   * `param1 = a`, `param2 = b`.
   */
  MS_PRIOR_FAMILY_BETA_BINOMIAL = 0,
  /**
   * `param1 = a`, `b = p^param2`.
   */
  MS_PRIOR_FAMILY_BETA_BINOMIAL_P_POWER = 1,
  /**
   * `param1 = rho`.
   */
  MS_PRIOR_FAMILY_CHILDREN = 2,
  /**
   * `param1 = eta`.
   */
  MS_PRIOR_FAMILY_DESCENDANT = 3,
  /**
   * `param1 = lambda`.
   */
  MS_PRIOR_FAMILY_POISSON_LIMIT = 4,
} MsPriorFamily;

typedef enum MsRuleKind {
  MS_RULE_KIND_NONE = 0,
  MS_RULE_KIND_LOCAL = 1,
  MS_RULE_KIND_GLOBAL = 2,
  MS_RULE_KIND_PATH = 3,
} MsRuleKind;

/**
 * Result code of every fallible call.
 */
typedef enum MsStatus {
  MS_STATUS_OK = 0,
  MS_STATUS_NULL_POINTER = 1,
  MS_STATUS_INVALID_ARGUMENT = 2,
  MS_STATUS_DATA_ERROR = 3,
  MS_STATUS_NUMERICAL_ERROR = 4,
  MS_STATUS_CONFIG_ERROR = 5,
  MS_STATUS_PANIC = 6,
} MsStatus;

typedef enum MsWPrior {
  MS_W_PRIOR_INTRINSIC = 0,
  /**
   * Uses the accompanying rate `b`.
   */
  MS_W_PRIOR_ZELLNER_SIOW = 1,
} MsWPrior;

/**
 * Regression data: response, intercept plus forced covariates, tested
 * covariates.
 */
typedef struct MsDesign MsDesign;

/**
 * Outcome of a search.
 */
typedef struct MsReport MsReport;

/**
 * Model-space prior; unused parameters are ignored.
 */
typedef struct MsPrior {
  enum MsPriorFamily family;
  double param1;
  double param2;
} MsPrior;

typedef struct MsRule {
  enum MsRuleKind kind;
  /**
   * Threshold in `(0, 1)`; ignored for `None`.
   */
  double epsilon;
} MsRule;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ms_last_error(void);

/**
 * Builds a design with an intercept from `y` (length `n`) and the column-major
 * `n × p` matrix `x`.
 *
 * # Safety
 * `y` must point to `n` doubles, `x` to `n * p` doubles and `out` to writable
 * storage for one handle.
 */
enum MsStatus ms_design_new(const double *y,
                            const double *x,
                            uintptr_t n,
                            uintptr_t p,
                            struct MsDesign **out);

/**
 * Loads a CSV file with a header row; every column except `y_column` becomes
 * a tested covariate.
 *
 * # Safety
 * `path` and `y_column` must be NUL-terminated strings and `out` writable.
 */
enum MsStatus ms_design_load_csv(const char *path, const char *y_column, struct MsDesign **out);

/**
 * Appends `copies` correlated copies of each of the first `base_columns`
 * covariates.
 *
 * # Safety
 * `design` must be a live handle and `out` writable.
 */
enum MsStatus ms_design_augment(const struct MsDesign *design,
                                uintptr_t base_columns,
                                uintptr_t copies,
                                uint64_t seed,
                                struct MsDesign **out);

/**
 * # Safety
 * `design` must be null or a handle not yet freed.
 */
void ms_design_free(struct MsDesign *design);

/**
 * # Safety
 * `design` must be a live handle; each output pointer may be null.
 */
enum MsStatus ms_design_dims(const struct MsDesign *design,
                             uintptr_t *n,
                             uintptr_t *p0,
                             uintptr_t *p);

/**
 * Coefficient of determination of the model with the given covariates.
 *
 * # Safety
 * `indices` must point to `len` values and `out` must be writable.
 */
enum MsStatus ms_r_squared(const struct MsDesign *design,
                           const uintptr_t *indices,
                           uintptr_t len,
                           double *out);

/**
 * Log Bayes factor of a model with `size` tested covariates against the
 * base model, using the default quadrature order of the w-prior.
 *
 * # Safety
 * `out` must be writable.
 */
enum MsStatus ms_log_bf_vs_null(double r2,
                                uintptr_t size,
                                uintptr_t n,
                                uintptr_t p0,
                                enum MsWPrior family,
                                double b,
                                double *out);

/**
 * Writes `log π_p(s)` for `s = 0..=p` into `out`, which holds `p + 1` values.
 *
 * # Safety
 * `prior` must be valid and `out` must have room for `p + 1` doubles.
 */
enum MsStatus ms_prior_log_pmf(const struct MsPrior *prior, uintptr_t p, double *out);

/**
 * Runs the search with the intrinsic w-prior. `max_visited = 0` means no
 * limit.
 *
 * # Safety
 * `design` and `prior` must be valid and `out` writable.
 */
enum MsStatus ms_search(const struct MsDesign *design,
                        const struct MsPrior *prior,
                        struct MsRule rule,
                        uintptr_t max_visited,
                        struct MsReport **out);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void ms_report_free(struct MsReport *report);

/**
 * Visited and considered model counts, models needed for 90% of the
 * posterior, and whether a limit stopped the search. Outputs may be null.
 *
 * # Safety
 * `report` must be a live handle.
 */
enum MsStatus ms_report_counts(const struct MsReport *report,
                               uintptr_t *visited,
                               uintptr_t *considered,
                               uintptr_t *to_cover_90,
                               bool *truncated);

/**
 * Copies the modal model's covariates into `out` (capacity `cap`) and its
 * size into `len`. Fails with `InvalidArgument` when `cap` is too small;
 * `len` is still set.
 *
 * # Safety
 * `report` must be live, `out` must have room for `cap` values and `len`
 * must be writable.
 */
enum MsStatus ms_report_modal(const struct MsReport *report,
                              uintptr_t *out,
                              uintptr_t cap,
                              uintptr_t *len);

/**
 * Posterior probability of the modal model.
 *
 * # Safety
 * `report` must be live and `out` writable.
 */
enum MsStatus ms_report_modal_probability(const struct MsReport *report, double *out);

/**
 * Copies the `p` inclusion probabilities into `out`.
 *
 * # Safety
 * `report` must be live and `out` must have room for `p` doubles.
 */
enum MsStatus ms_report_inclusion(const struct MsReport *report, double *out, uintptr_t p);

/**
 * Serializes the full report as JSON. Release the string with
 * [`ms_string_free`].
 *
 * # Safety
 * `report` must be live and `out` writable.
 */
enum MsStatus ms_report_to_json(const struct MsReport *report, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void ms_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MODELSPACE_H */
