#ifndef SPLITSOLVE_H
#define SPLITSOLVE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum SsStatus {
  SS_STATUS_OK = 0,
  SS_STATUS_NULL_POINTER = 1,
  SS_STATUS_INVALID_ARGUMENT = 2,
  SS_STATUS_INVALID_GRID = 3,
  SS_STATUS_NON_COERCIVE = 4,
  SS_STATUS_RADIUS_EXHAUSTED = 5,
  SS_STATUS_CFL_VIOLATION = 6,
  SS_STATUS_STEP_MISMATCH = 7,
  SS_STATUS_OUT_OF_RANGE = 8,
  SS_STATUS_POLICY_NON_CONVERGENCE = 9,
  SS_STATUS_DEGENERATE_FIT = 10,
  SS_STATUS_EXPRESSION = 11,
  SS_STATUS_CONFIG = 12,
  SS_STATUS_IO = 13,
  SS_STATUS_PANIC = 99,
} SsStatus;

// A PDE instance.
typedef struct SsProblem SsProblem;

// Time layers `t = 0, Δ, …, T` on a uniform grid.
typedef struct SsSolution SsSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none. The
// pointer stays valid until the next failing call on the same thread.
const char *ss_last_error_message(void);

// Static name of a status code.
const char *ss_status_name(enum SsStatus status);

// Cole-Hopf benchmark: σ = 1, b = 0, H = p²/2, U = clamp(x, 0, k).
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum SsStatus ss_problem_cole_hopf(double k, double horizon, struct SsProblem **out);

// H = a·p + p²/2 with the Cole-Hopf coefficients and terminal datum.
//
// # Safety
// As [`ss_problem_cole_hopf`].
enum SsStatus ss_problem_quadratic_drift(double a,
                                         double k,
                                         double horizon,
                                         struct SsProblem **out);

// H = p⁴/4 with the Cole-Hopf coefficients and terminal datum.
//
// # Safety
// As [`ss_problem_cole_hopf`].
enum SsStatus ss_problem_quartic(double k, double horizon, struct SsProblem **out);

// Builds the problem described by the `[problem]` section of a config file.
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string; `out` as above.
enum SsStatus ss_problem_from_config(const char *path, struct SsProblem **out);

// Horizon `T` of a problem, or NaN for a null handle.
//
// # Safety
// `problem` must be null or a live handle.
double ss_problem_horizon(const struct SsProblem *problem);

// # Safety
// `problem` must be null or a handle not yet freed.
void ss_problem_free(struct SsProblem *problem);

// Runs the splitting scheme with step `delta` on the grid
// `x_min, x_min + h, …, x_max`.
//
// # Safety
// `problem` must be a live handle; `out` must be writable.
enum SsStatus ss_solve(const struct SsProblem *problem,
                       double x_min,
                       double x_max,
                       double h,
                       double delta,
                       struct SsSolution **out);

// Howard policy iteration on an implicit finite-difference scheme, with the
// control set derived from the problem.
//
// # Safety
// As [`ss_solve`].
enum SsStatus ss_howard_solve(const struct SsProblem *problem,
                              double x_min,
                              double x_max,
                              double h,
                              double delta,
                              struct SsSolution **out);

// Value at `(t, x)`, interpolating linearly in space and using the terminal
// layer inside the last step.
//
// # Safety
// `solution` must be a live handle; `out` must be writable.
enum SsStatus ss_solution_evaluate(const struct SsSolution *solution,
                                   double t,
                                   double x,
                                   double *out);

// Number of stored layers (`T/Δ + 1`), or 0 for a null handle.
//
// # Safety
// `solution` must be null or a live handle.
size_t ss_solution_num_layers(const struct SsSolution *solution);

// Number of grid nodes per layer, or 0 for a null handle.
//
// # Safety
// `solution` must be null or a live handle.
size_t ss_solution_num_nodes(const struct SsSolution *solution);

// Copies layer `k` (time `kΔ`) into `buf`, which must hold `len` values with
// `len` equal to [`ss_solution_num_nodes`].
//
// # Safety
// `solution` must be a live handle; `buf` must be writable for `len` doubles.
enum SsStatus ss_solution_layer(const struct SsSolution *solution,
                                size_t k,
                                double *buf,
                                size_t len);

// # Safety
// `solution` must be null or a handle not yet freed.
void ss_solution_free(struct SsSolution *solution);

// Closed-form Cole-Hopf solution at `(t, x)` for `t < horizon`.
//
// # Safety
// `out` must be writable.
enum SsStatus ss_cole_hopf_exact(double k, double horizon, double t, double x, double *out);

// Standard normal CDF.
double ss_normal_cdf(double z);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPLITSOLVE_H */
