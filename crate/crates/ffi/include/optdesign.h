#ifndef OPTDESIGN_H
#define OPTDESIGN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define OD_CRITERION_D 0

#define OD_CRITERION_A 1

#define OD_TO_NO_INTERCEPT 0

#define OD_TO_INTERCEPT 1

/**
 * Status codes; 0-4 match the command-line exit codes.
 */
typedef enum OdStatus {
  OD_STATUS_OK = 0,
  OD_STATUS_CHECK_FAILED = 1,
  OD_STATUS_INPUT_ERROR = 2,
  OD_STATUS_SINGULAR = 3,
  OD_STATUS_NO_CONVERGENCE = 4,
  OD_STATUS_NULL_POINTER = 5,
  OD_STATUS_PANIC = 6,
} OdStatus;

/**
 * A design together with the model block it was loaded with, if any.
 */
typedef struct OdDesign OdDesign;

typedef struct OdModel OdModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Valid until the next call.
 */
const char *od_last_error_message(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void od_string_free(char *s);

/**
 * Parses a JSON design file. `truncate <= 0` uses the default bound for unbounded axes.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum OdStatus od_design_from_json(const char *json, double truncate, struct OdDesign **out);

/**
 * Serializes a design (and its model block) to JSON. Free the result with [`od_string_free`].
 *
 * # Safety
 * `design` must be a live handle; `out` must be writable.
 */
enum OdStatus od_design_to_json(const struct OdDesign *design, char **out);

/**
 * # Safety
 * `design` must come from this library and not have been freed.
 */
void od_design_free(struct OdDesign *design);

/**
 * # Safety
 * `design` must be a live handle; outputs must be writable.
 */
enum OdStatus od_design_shape(const struct OdDesign *design, size_t *len, size_t *dim);

/**
 * Copies support point `i` into `x` (length `dim`) and its weight into `w`.
 *
 * # Safety
 * `design` must be a live handle, `x` must hold `dim` doubles, `w` must be writable.
 */
enum OdStatus od_design_point(const struct OdDesign *design,
                              size_t i,
                              double *x,
                              size_t dim,
                              double *w);

/**
 * Builds a model. `beta` is the full parameter vector with the intercept first
 * when `with_intercept`; for E-max and exponential models the slope part is `(β₁, β₂)`.
 *
 * # Safety
 * `family` must be a NUL-terminated string, `beta` must hold `beta_len` doubles,
 * `out` must be writable.
 */
enum OdStatus od_model_new(const char *family,
                           bool with_intercept,
                           size_t dim,
                           const double *beta,
                           size_t beta_len,
                           struct OdModel **out);

/**
 * The model block stored in a design file.
 *
 * # Safety
 * `design` must be a live handle; `out` must be writable.
 */
enum OdStatus od_design_model(const struct OdDesign *design, struct OdModel **out);

/**
 * # Safety
 * `model` must come from this library and not have been freed.
 */
void od_model_free(struct OdModel *model);

/**
 * `det(M⁻¹)` for D, `tr(M⁻¹)` for A.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum OdStatus od_criterion(const struct OdDesign *design,
                           const struct OdModel *model,
                           int32_t which,
                           double *out);

/**
 * Sensitivity `ψ(x)` of the design.
 *
 * # Safety
 * Handles must be live; `x` must hold `dim` doubles; `out` must be writable.
 */
enum OdStatus od_sensitivity(const struct OdDesign *design,
                             const struct OdModel *model,
                             int32_t which,
                             const double *x,
                             size_t dim,
                             double *out);

/**
 * Equivalence check on a `grid_res` lattice over the design's region.
 * Returns `Ok` when it passes and `CheckFailed` otherwise; `max_excess` is set in both cases.
 *
 * # Safety
 * Handles must be live; `max_excess` must be writable.
 */
enum OdStatus od_verify(const struct OdDesign *design,
                        const struct OdModel *model,
                        int32_t which,
                        size_t grid_res,
                        double slack,
                        double *max_excess);

/**
 * Transfers a design between the intercept and no-intercept models.
 * `model` describes the family and `β`; its intercept flag is ignored. On
 * `Ok` the result is certified and written to `out` together with the target model.
 *
 * # Safety
 * Handles must be live; `out` and `origin_weight` must be writable.
 */
enum OdStatus od_transfer(const struct OdDesign *design,
                          const struct OdModel *model,
                          int32_t which,
                          int32_t direction,
                          size_t grid_res,
                          double slack,
                          struct OdDesign **out,
                          double *origin_weight);

/**
 * Multiplicative algorithm on a `grid_res` lattice over the box `[lower, upper]`,
 * with default iteration limit, tolerance and prune threshold.
 *
 * # Safety
 * `model` must be live; `lower`/`upper` must hold `dim` doubles; `out` must be writable.
 */
enum OdStatus od_optimize(const struct OdModel *model,
                          const double *lower,
                          const double *upper,
                          size_t dim,
                          size_t grid_res,
                          int32_t which,
                          struct OdDesign **out);

/**
 * Root of `2 + u + 2eᵘ − u eᵘ` for `u > 2`.
 *
 * # Safety
 * `out` must be writable.
 */
enum OdStatus od_ustar(double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPTDESIGN_H */
