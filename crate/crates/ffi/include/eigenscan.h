/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef EIGENSCAN_H
#define EIGENSCAN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum es_procedure {
  /**
   * Largest eigenvalue of the windowed covariance.
   */
  ES_PROCEDURE_MAX_EIG = 0,
  /**
   * Inverse of the smallest eigenvalue.
   */
  ES_PROCEDURE_MIN_EIG_INVERSE = 1,
} es_procedure;

typedef enum es_status {
  ES_STATUS_OK = 0,
  ES_STATUS_INVALID_ARGUMENT = 1,
  ES_STATUS_DATA_ERROR = 2,
  ES_STATUS_NUMERIC_ERROR = 3,
  ES_STATUS_TAIL_RESOLUTION = 4,
  ES_STATUS_CALIBRATION_INFEASIBLE = 5,
  ES_STATUS_ALREADY_ALARMED = 6,
  ES_STATUS_NULL_POINTER = 7,
  ES_STATUS_PANIC = 8,
} es_status;

typedef enum es_step_state {
  /**
   * Window not full yet; `statistic` is NaN.
   */
  ES_STEP_STATE_NOT_READY = 0,
  ES_STEP_STATE_STATISTIC = 1,
  ES_STEP_STATE_ALARM = 2,
} es_step_state;

/**
 * Opaque detector handle.
 */
typedef struct es_detector es_detector;

typedef struct es_step_result {
  enum es_step_state state;
  double statistic;
  /**
   * Observations consumed so far, counting from 1.
   */
  uint64_t time;
  /**
   * Set on alarms caused by a numerically singular window.
   */
  bool singular;
} es_step_result;

typedef struct es_calibration {
  double threshold_b;
  /**
   * Standardized quantile the threshold corresponds to.
   */
  double standardized;
} es_calibration;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `len > 0`). Returns the full message length
 * without the terminator, or 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t es_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *es_version(void);

/**
 * Creates a detector. `threshold_b` may be `INFINITY` to monitor without
 * alarming.
 *
 * # Safety
 * `out` must be null or a valid pointer to writable storage for a handle.
 */
enum es_status es_detector_new(enum es_procedure procedure,
                               size_t p,
                               size_t w,
                               double threshold_b,
                               struct es_detector **out);

/**
 * Releases a detector. Null is ignored.
 *
 * # Safety
 * `det` must be null or a handle from [`es_detector_new`] not yet freed.
 */
void es_detector_free(struct es_detector *det);

/**
 * Feeds one observation of `len` values (must equal `p`). After an alarm
 * the detector refuses further input with `ALREADY_ALARMED` until reset.
 *
 * # Safety
 * `det` must be a live handle, `x` must point to `len` readable doubles and
 * `out` must be writable.
 */
enum es_status es_detector_step(struct es_detector *det,
                                const double *x,
                                size_t len,
                                struct es_step_result *out);

/**
 * Clears the window, time counter and alarm state.
 *
 * # Safety
 * `det` must be null or a live handle.
 */
enum es_status es_detector_reset(struct es_detector *det);

/**
 * Writes the alarm time to `time` and sets `alarmed`; `time` is 0 when the
 * detector has not alarmed.
 *
 * # Safety
 * `det` must be a live handle; `alarmed` and `time` must be writable.
 */
enum es_status es_detector_alarm_time(const struct es_detector *det, bool *alarmed, uint64_t *time);

/**
 * Tracy-Widom threshold for the largest-eigenvalue procedure.
 *
 * # Safety
 * `out` must be writable.
 */
enum es_status es_calibrate_tw_max(size_t w,
                                   size_t p,
                                   double target_arl,
                                   struct es_calibration *out);

/**
 * Tracy-Widom threshold for the inverse smallest-eigenvalue procedure.
 *
 * # Safety
 * `out` must be writable.
 */
enum es_status es_calibrate_tw_min(size_t w,
                                   size_t p,
                                   double target_arl,
                                   struct es_calibration *out);

/**
 * Largest-eigenvalue threshold corrected for temporal correlation.
 *
 * # Safety
 * `out` must be writable.
 */
enum es_status es_calibrate_corrected(size_t w,
                                      size_t p,
                                      double target_arl,
                                      struct es_calibration *out);

/**
 * Tracy-Widom (order one) distribution function.
 *
 * # Safety
 * `out` must be writable.
 */
enum es_status es_tw1_cdf(double x, double *out);

/**
 * Upper `alpha` point of the Tracy-Widom (order one) law.
 *
 * # Safety
 * `out` must be writable.
 */
enum es_status es_tw1_upper_quantile(double alpha, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EIGENSCAN_H */
