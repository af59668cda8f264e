#ifndef SHELLCIR_H
#define SHELLCIR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the non-zero geometry/convergence/config values match the
 * command-line exit codes.
 */
typedef enum ShellcirStatus {
  SHELLCIR_STATUS_OK = 0,
  SHELLCIR_STATUS_NULL_POINTER = 1,
  SHELLCIR_STATUS_DEGENERATE_GEOMETRY = 2,
  SHELLCIR_STATUS_CONVERGENCE_FAILURE = 3,
  SHELLCIR_STATUS_NOT_CONVERGED = 4,
  SHELLCIR_STATUS_CONFIG_ERROR = 5,
  SHELLCIR_STATUS_DOMAIN_ERROR = 6,
  SHELLCIR_STATUS_NO_SOLUTION = 7,
  SHELLCIR_STATUS_IO_ERROR = 8,
  SHELLCIR_STATUS_PANIC = 9,
} ShellcirStatus;

/**
 * Absorption-deadline method for [`shellcir_channel_t_star`].
 */
typedef enum ShellcirTStarMethod {
  SHELLCIR_T_STAR_METHOD_CLOSED_FORM = 0,
  SHELLCIR_T_STAR_METHOD_EXACT_INVERSION = 1,
} ShellcirTStarMethod;

typedef struct ShellcirChannel ShellcirChannel;

typedef struct ShellcirHistogram ShellcirHistogram;

typedef struct ShellcirModeTable ShellcirModeTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *shellcir_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *shellcir_version(void);

/**
 * First `count` eigenmodes of a shell with radius ratio `alpha`.
 *
 * # Safety
 * `out` must be a valid pointer; the handle written there is owned by the
 * caller and must be released with [`shellcir_modes_free`].
 */
enum ShellcirStatus shellcir_modes_new(double alpha, size_t count, struct ShellcirModeTable **out);

/**
 * # Safety
 * `table` must come from [`shellcir_modes_new`] and not be used afterwards.
 */
void shellcir_modes_free(struct ShellcirModeTable *table);

/**
 * Number of modes in the table (0 for a null handle).
 *
 * # Safety
 * `table` must be null or a live handle.
 */
size_t shellcir_modes_len(const struct ShellcirModeTable *table);

/**
 * Mode `n` (1-based): eigenvalue, mixing coefficient and norm.
 *
 * # Safety
 * `table` must be a live handle; the out pointers must be valid.
 */
enum ShellcirStatus shellcir_modes_get(const struct ShellcirModeTable *table,
                                       size_t n,
                                       double *beta,
                                       double *c,
                                       double *norm);

/**
 * Channel with receiver radius `d0`, boundary radius `big_d0` and source
 * distance `r0` (all um) and diffusivity `diffusivity` (um^2/s).
 *
 * # Safety
 * `out` must be valid; release the handle with [`shellcir_channel_free`].
 */
enum ShellcirStatus shellcir_channel_new(double d0,
                                         double big_d0,
                                         double r0,
                                         double diffusivity,
                                         struct ShellcirChannel **out);

/**
 * # Safety
 * `channel` must come from [`shellcir_channel_new`] and not be used afterwards.
 */
void shellcir_channel_free(struct ShellcirChannel *channel);

/**
 * Smallest time, s, at which the series is evaluated.
 *
 * # Safety
 * `channel` must be a live handle and `out` valid.
 */
enum ShellcirStatus shellcir_channel_floor(const struct ShellcirChannel *channel, double *out);

/**
 * Hitting rate at `t`, 1/s.
 *
 * # Safety
 * `channel` must be a live handle and `out` valid.
 */
enum ShellcirStatus shellcir_channel_hitting_rate(const struct ShellcirChannel *channel,
                                                  double t,
                                                  double *out);

/**
 * Absorbed fraction by `t`.
 *
 * # Safety
 * `channel` must be a live handle and `out` valid.
 */
enum ShellcirStatus shellcir_channel_cumulative(const struct ShellcirChannel *channel,
                                                double t,
                                                double *out);

/**
 * Fraction still free at `t`.
 *
 * # Safety
 * `channel` must be a live handle and `out` valid.
 */
enum ShellcirStatus shellcir_channel_survival(const struct ShellcirChannel *channel,
                                              double t,
                                              double *out);

/**
 * Concentration at radius `r` (um) and time `t`, 1/um^3.
 *
 * # Safety
 * `channel` must be a live handle and `out` valid.
 */
enum ShellcirStatus shellcir_channel_pdf(const struct ShellcirChannel *channel,
                                         double r,
                                         double t,
                                         double *out);

/**
 * Time and height of the hitting-rate maximum.
 *
 * # Safety
 * `channel` must be a live handle; the out pointers must be valid.
 */
enum ShellcirStatus shellcir_channel_peak(const struct ShellcirChannel *channel,
                                          double *tau_peak,
                                          double *n_peak);

/**
 * Time by which a `1 - eps` fraction has been absorbed.
 *
 * # Safety
 * `channel` must be a live handle and `out` valid.
 */
enum ShellcirStatus shellcir_channel_t_star(const struct ShellcirChannel *channel,
                                            double eps,
                                            enum ShellcirTStarMethod method,
                                            double *out);

/**
 * Single-mode upper estimate of the absorption deadline.
 *
 * # Safety
 * `channel` must be a live handle and `out` valid.
 */
enum ShellcirStatus shellcir_channel_t_star_max(const struct ShellcirChannel *channel,
                                                double eps,
                                                double *out);

/**
 * Free-space hitting rate at `t`.
 *
 * # Safety
 * `out` must be valid.
 */
enum ShellcirStatus shellcir_unbounded_rate(double d0,
                                            double r0,
                                            double diffusivity,
                                            double t,
                                            double *out);

/**
 * Free-space absorbed fraction by `t` (`t` may be infinite).
 *
 * # Safety
 * `out` must be valid.
 */
enum ShellcirStatus shellcir_unbounded_cdf(double d0,
                                           double r0,
                                           double diffusivity,
                                           double t,
                                           double *out);

/**
 * Particle simulation with the default reflection and step policies.
 * `dt <= 0` selects the default step; `workers == 0` uses all cores.
 *
 * # Safety
 * `channel` must be a live handle and `out` valid; release the histogram
 * with [`shellcir_histogram_free`].
 */
enum ShellcirStatus shellcir_simulate(const struct ShellcirChannel *channel,
                                      uint64_t particles,
                                      double t_end,
                                      double dt,
                                      size_t bins,
                                      uint64_t seed,
                                      size_t workers,
                                      struct ShellcirHistogram **out);

/**
 * # Safety
 * `hist` must come from [`shellcir_simulate`] and not be used afterwards.
 */
void shellcir_histogram_free(struct ShellcirHistogram *hist);

/**
 * Number of bins (0 for a null handle).
 *
 * # Safety
 * `hist` must be null or a live handle.
 */
size_t shellcir_histogram_bins(const struct ShellcirHistogram *hist);

/**
 * Copies bin counts into `counts` (length `len`, at least the bin count)
 * and bin edges into `edges` (length at least bins + 1). Either buffer may
 * be null to skip it.
 *
 * # Safety
 * `hist` must be a live handle; non-null buffers must hold `len` and
 * `len + 1` elements respectively.
 */
enum ShellcirStatus shellcir_histogram_copy(const struct ShellcirHistogram *hist,
                                            uint64_t *counts,
                                            double *edges,
                                            size_t len);

/**
 * Molecules absorbed before the end of the simulation, and molecules released.
 *
 * # Safety
 * `hist` must be a live handle; the out pointers must be valid.
 */
enum ShellcirStatus shellcir_histogram_totals(const struct ShellcirHistogram *hist,
                                              uint64_t *absorbed,
                                              uint64_t *released);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHELLCIR_H */
