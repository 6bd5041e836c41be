#ifndef TENTWAVE_H
#define TENTWAVE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  TW_STATUS_OK = 0,
  TW_STATUS_NULL_POINTER = 1,
  TW_STATUS_INVALID_ARGUMENT = 2,
  TW_STATUS_CONFIG = 3,
  TW_STATUS_NUMERICAL = 4,
  TW_STATUS_BUFFER_TOO_SMALL = 5,
  TW_STATUS_PANIC = 6,
} TwStatus;

typedef enum {
  TW_VERDICT_STABLE = 0,
  TW_VERDICT_MARGINAL = 1,
  TW_VERDICT_UNSTABLE = 2,
} TwVerdict;

/**
 * Parsed and validated run configuration.
 */
typedef struct TwConfig TwConfig;

/**
 * Space-time tent mesh.
 */
typedef struct TwMesh TwMesh;

/**
 * Marched solution.
 */
typedef struct TwSolution TwSolution;

/**
 * Initial data callback: writes `(u1, u2)` at `x`. Called synchronously
 * from the thread running [`tw_solve`], never after it returns.
 */
typedef void (*TwInitialFn)(double x, double *u1, double *u2, void *user_data);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or null. The pointer
 * stays valid until the next `tw_*` call on the same thread.
 */
const char *tw_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tw_version(void);

/**
 * Parse a JSON run configuration.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
TwStatus tw_config_parse(const char *json, TwConfig **out);

/**
 * # Safety
 * `config` must come from [`tw_config_parse`] or be null.
 */
void tw_config_free(TwConfig *config);

/**
 * Pitch the space-time mesh described by `config`.
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer.
 */
TwStatus tw_mesh_build(const TwConfig *config, TwMesh **out);

/**
 * # Safety
 * `mesh` must come from [`tw_mesh_build`] or be null.
 */
void tw_mesh_free(TwMesh *mesh);

/**
 * # Safety
 * `mesh` must be a live handle and `n` a valid pointer.
 */
TwStatus tw_mesh_tent_count(const TwMesh *mesh, size_t *n);

/**
 * # Safety
 * `mesh` must be a live handle and `t` a valid pointer.
 */
TwStatus tw_mesh_covered_time(const TwMesh *mesh, double *t);

/**
 * March `mesh` with the problem of `config`. When `initial` is non-null it
 * replaces the configured initial data; the exact solution, if any, is then
 * dropped.
 *
 * # Safety
 * Handles must be live, `out` valid, and `initial` (if set) safe to call with `user_data`.
 */
TwStatus tw_solve(const TwConfig *config,
                  const TwMesh *mesh,
                  TwInitialFn initial,
                  void *user_data,
                  TwSolution **out);

/**
 * # Safety
 * `solution` must come from [`tw_solve`] or be null.
 */
void tw_solution_free(TwSolution *solution);

/**
 * # Safety
 * `solution` must be live; `u1`, `u2` valid pointers.
 */
TwStatus tw_solution_evaluate(const TwSolution *solution,
                              double x,
                              double t,
                              double *u1,
                              double *u2);

/**
 * Copy the trace on level `t` into caller buffers of length `capacity`.
 * `len` receives the number of breakpoints; if it exceeds `capacity` the
 * call returns [`TwStatus::BufferTooSmall`] without writing, so passing
 * `capacity = 0` queries the size.
 *
 * # Safety
 * `solution` must be live, `len` valid, and each buffer hold `capacity` doubles.
 */
TwStatus tw_solution_snapshot(const TwSolution *solution,
                              double t,
                              double *x,
                              double *u1,
                              double *u2,
                              size_t capacity,
                              size_t *len);

/**
 * `½ ∫ (k1 u1² + k2 u2²) dx` at time `t`.
 *
 * # Safety
 * `solution` must be live and `energy` valid.
 */
TwStatus tw_solution_energy(const TwSolution *solution, double t, double *energy);

/**
 * `L²` error against the configured exact solution; [`TwStatus::Config`]
 * when the problem has none.
 *
 * # Safety
 * `solution` must be live and `error` valid.
 */
TwStatus tw_solution_l2_error(const TwSolution *solution, double t, double *error);

/**
 * Von Neumann sweep of the uniform stencil at Courant number `ac`.
 *
 * # Safety
 * `max_radius` and `verdict` must be valid pointers.
 */
TwStatus tw_stability_sweep(double ac, size_t n_theta, double *max_radius, TwVerdict *verdict);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TENTWAVE_H */
