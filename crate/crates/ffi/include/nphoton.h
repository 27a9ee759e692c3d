#ifndef NPHOTON_H
#define NPHOTON_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum NphotonStatus {
  NPHOTON_STATUS_OK = 0,
  NPHOTON_STATUS_NULL_POINTER = 1,
  /**
   * Parameters rejected before any computation.
   */
  NPHOTON_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The engine failed while computing.
   */
  NPHOTON_STATUS_COMPUTATION_FAILED = 3,
  /**
   * Caller-provided buffer is too small; the required size is reported.
   */
  NPHOTON_STATUS_BUFFER_TOO_SMALL = 4,
  NPHOTON_STATUS_PANIC = 5,
} NphotonStatus;

/**
 * Opaque model handle.
 */
typedef struct NphotonModel NphotonModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *nphoton_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nphoton_version(void);

/**
 * Dissipative Jaynes–Cummings model with `g = 1`.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum NphotonStatus nphoton_model_jc(double gamma_a,
                                    double gamma_s,
                                    double p_s,
                                    size_t n_max,
                                    struct NphotonModel **out);

/**
 * Incoherently pumped cavity.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum NphotonStatus nphoton_model_thermal(double p_a,
                                         double gamma_a,
                                         size_t n_max,
                                         struct NphotonModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `m` must be null or a handle not yet freed.
 */
void nphoton_model_free(struct NphotonModel *m);

/**
 * Physical spectrum at `n` frequencies through one sensor of width `gamma`.
 * Starved frequencies give 0.
 *
 * # Safety
 * `omegas` and `out` must hold `n` values.
 */
enum NphotonStatus nphoton_sensor_spectrum(const struct NphotonModel *m,
                                           const double *omegas,
                                           size_t n,
                                           double gamma,
                                           double chi,
                                           double *out);

/**
 * Zero-delay correlation of `n` sensors at `(omegas[k], gammas[k])`.
 *
 * # Safety
 * `omegas` and `gammas` must hold `n` values, `out` one.
 */
enum NphotonStatus nphoton_gn_zero_delay(const struct NphotonModel *m,
                                         const double *omegas,
                                         const double *gammas,
                                         size_t n,
                                         double chi,
                                         double *out);

/**
 * Two-sensor correlation at `n` signed delays (positive: sensor 2 after
 * sensor 1).
 *
 * # Safety
 * `taus` and `out` must hold `n` values.
 */
enum NphotonStatus nphoton_g2_delays(const struct NphotonModel *m,
                                     double omega1,
                                     double gamma1,
                                     double omega2,
                                     double gamma2,
                                     const double *taus,
                                     size_t n,
                                     double chi,
                                     double *out);

/**
 * Zero-delay two-photon correlation from the integral-method oracle.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum NphotonStatus nphoton_g2_oracle(const struct NphotonModel *m,
                                     double omega1,
                                     double gamma1,
                                     double omega2,
                                     double gamma2,
                                     double *out);

/**
 * Jaynes–Cummings transitions up to `rungs`. Writes at most `capacity`
 * frequency/linewidth pairs and always stores the total in `count`; a
 * short buffer yields `NPHOTON_STATUS_BUFFER_TOO_SMALL`.
 *
 * # Safety
 * `frequencies` and `linewidths` must hold `capacity` values; `count` must
 * be valid.
 */
enum NphotonStatus nphoton_ladder(double gamma_a,
                                  double gamma_s,
                                  uint32_t rungs,
                                  double *frequencies,
                                  double *linewidths,
                                  size_t capacity,
                                  size_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NPHOTON_H */
