#ifndef POROUS_DA_H
#define POROUS_DA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Norm selector for decay fits.
 */
typedef enum PdaMetric {
  PDA_METRIC_L2 = 0,
  PDA_METRIC_LINF = 1,
  PDA_METRIC_V0_STAR = 2,
} PdaMetric;

typedef enum PdaStatus {
  PDA_STATUS_OK = 0,
  PDA_STATUS_NULL_POINTER = 1,
  PDA_STATUS_INVALID_ARGUMENT = 2,
  PDA_STATUS_GRID = 3,
  PDA_STATUS_GRID_MISMATCH = 4,
  PDA_STATUS_ASSEMBLY = 5,
  PDA_STATUS_SOLVABILITY = 6,
  PDA_STATUS_SOLVER = 7,
  PDA_STATUS_CFL = 8,
  PDA_STATUS_NUDGING_STABILITY = 9,
  PDA_STATUS_CONFIG = 10,
  PDA_STATUS_PARSE = 11,
  PDA_STATUS_REFERENCE = 12,
  PDA_STATUS_IO = 13,
  PDA_STATUS_OUT_OF_RANGE = 14,
  PDA_STATUS_BUFFER_TOO_SMALL = 15,
  PDA_STATUS_UTF8 = 16,
  PDA_STATUS_PANIC = 99,
} PdaStatus;

/**
 * Run configuration.
 */
typedef struct PdaConfig PdaConfig;

/**
 * Error records of an assimilation run.
 */
typedef struct PdaSeries PdaSeries;

/**
 * Stored saturation snapshots of a run.
 */
typedef struct PdaTrajectory PdaTrajectory;

typedef struct PdaErrorRecord {
  double t;
  double l2;
  double linf;
  /**
   * Meaningful only when `has_v0star` is true.
   */
  double v0star;
  bool has_v0star;
} PdaErrorRecord;

typedef struct PdaDecayFit {
  double rate;
  double r_squared;
  size_t points;
} PdaDecayFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pda_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *pda_last_error_message(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void pda_string_free(char *s);

/**
 * Default configuration.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum PdaStatus pda_config_new(struct PdaConfig **out);

/**
 * Parses a TOML configuration document.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum PdaStatus pda_config_from_toml(const char *toml, struct PdaConfig **out);

/**
 * Reads a TOML configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PdaStatus pda_config_read(const char *path, struct PdaConfig **out);

/**
 * Serializes the configuration to TOML. Free the result with
 * [`pda_string_free`]; NULL on failure.
 *
 * # Safety
 * `cfg` must be a live handle or NULL.
 */
char *pda_config_to_toml(const struct PdaConfig *cfg);

/**
 * Hex SHA-256 of the configuration. Free with [`pda_string_free`].
 *
 * # Safety
 * `cfg` must be a live handle or NULL.
 */
char *pda_config_hash(const struct PdaConfig *cfg);

/**
 * Sets a fixed nudging strength.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum PdaStatus pda_config_set_mu(struct PdaConfig *cfg, double mu);

/**
 * Sets `dt`, the spin-up time and the reference horizon.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum PdaStatus pda_config_set_time(struct PdaConfig *cfg, double dt, double t_spin, double t_end);

/**
 * Sets fine and coarse cell counts.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum PdaStatus pda_config_set_grid(struct PdaConfig *cfg,
                                   size_t nx,
                                   size_t ny,
                                   size_t coarse_nx,
                                   size_t coarse_ny);

/**
 * Restricts observations to the rectangle `[x0, x1] x [y0, y1]`; pass
 * `observe_all = true` to observe the whole domain instead.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum PdaStatus pda_config_set_mask(struct PdaConfig *cfg,
                                   bool observe_all,
                                   double x0,
                                   double y0,
                                   double x1,
                                   double y1);

/**
 * Starts the assimilated run from the reference state instead of zero.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum PdaStatus pda_config_set_start_from_reference(struct PdaConfig *cfg, bool enabled);

/**
 * # Safety
 * `cfg` must be NULL or a handle not yet freed.
 */
void pda_config_free(struct PdaConfig *cfg);

/**
 * Runs the reference from zero saturation.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum PdaStatus pda_run_reference(const struct PdaConfig *cfg, struct PdaTrajectory **out);

/**
 * Runs the nudged model against `reference`. Either output pointer may be
 * NULL when that result is not wanted.
 *
 * # Safety
 * `cfg` and `reference` must be live handles; non-NULL outputs writable.
 */
enum PdaStatus pda_run_assimilation(const struct PdaConfig *cfg,
                                    const struct PdaTrajectory *reference,
                                    struct PdaTrajectory **out_trajectory,
                                    struct PdaSeries **out_series);

/**
 * Number of stored snapshots; 0 for NULL.
 *
 * # Safety
 * `traj` must be NULL or a live handle.
 */
size_t pda_trajectory_len(const struct PdaTrajectory *traj);

/**
 * Fine grid cell counts.
 *
 * # Safety
 * `traj` must be a live handle; `nx` and `ny` writable.
 */
enum PdaStatus pda_trajectory_dims(const struct PdaTrajectory *traj, size_t *nx, size_t *ny);

/**
 * Copies snapshot `index` into `values` (row-major, `len >= nx * ny`) and
 * reports its step and time.
 *
 * # Safety
 * `traj` must be a live handle; `step` and `t` writable; `values` must
 * hold `len` writable doubles.
 */
enum PdaStatus pda_trajectory_snapshot(const struct PdaTrajectory *traj,
                                       size_t index,
                                       size_t *step,
                                       double *t,
                                       double *values,
                                       size_t len);

/**
 * Writes the trajectory directory (manifest plus binary snapshots).
 *
 * # Safety
 * `traj` must be a live handle; `dir` a NUL-terminated string.
 */
enum PdaStatus pda_trajectory_write(const struct PdaTrajectory *traj, const char *dir);

/**
 * Reads a trajectory directory written by [`pda_trajectory_write`].
 *
 * # Safety
 * `dir` must be a NUL-terminated string; `out` writable.
 */
enum PdaStatus pda_trajectory_read(const char *dir, struct PdaTrajectory **out);

/**
 * # Safety
 * `traj` must be NULL or a handle not yet freed.
 */
void pda_trajectory_free(struct PdaTrajectory *traj);

/**
 * Number of records; 0 for NULL.
 *
 * # Safety
 * `series` must be NULL or a live handle.
 */
size_t pda_series_len(const struct PdaSeries *series);

/**
 * # Safety
 * `series` must be a live handle; `out` writable.
 */
enum PdaStatus pda_series_get(const struct PdaSeries *series,
                              size_t index,
                              struct PdaErrorRecord *out);

/**
 * Writes the series as CSV with header `t,l2,linf,v0star`.
 *
 * # Safety
 * `series` must be a live handle; `path` a NUL-terminated string.
 */
enum PdaStatus pda_series_write_csv(const struct PdaSeries *series, const char *path);

/**
 * Least-squares decay rate of `ln(metric)` over `[t_a, t_b]`.
 *
 * # Safety
 * `series` must be a live handle; `out` writable.
 */
enum PdaStatus pda_series_fit_decay(const struct PdaSeries *series,
                                    enum PdaMetric metric,
                                    double t_a,
                                    double t_b,
                                    struct PdaDecayFit *out);

/**
 * # Safety
 * `series` must be NULL or a handle not yet freed.
 */
void pda_series_free(struct PdaSeries *series);

/**
 * Dual norm of `e` through the permeability-weighted Green operator, on an
 * `nx` by `ny` grid of extent `lx` by `ly`.
 *
 * # Safety
 * `e` and `perm` must each hold `nx * ny` readable doubles; `out` writable.
 */
enum PdaStatus pda_v0star_norm(size_t nx,
                               size_t ny,
                               double lx,
                               double ly,
                               const double *e,
                               const double *perm,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POROUS_DA_H */
