#ifndef DRSPLIT_H
#define DRSPLIT_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DrsVariant {
  /**
   * Use the problem's variant, or FG when it has none.
   */
  DRS_VARIANT_DEFAULT = 0,
  DRS_VARIANT_FG = 1,
  DRS_VARIANT_GF = 2,
} DrsVariant;

typedef enum DrsStatus {
  DRS_STATUS_OK = 0,
  DRS_STATUS_INVALID_ARGUMENT = 1,
  DRS_STATUS_UNSUPPORTED = 2,
  DRS_STATUS_NULL_POINTER = 3,
  DRS_STATUS_NUMERICAL = 4,
  DRS_STATUS_PANIC = 5,
} DrsStatus;

typedef enum DrsCase {
  DRS_CASE_MONOTONE_B = 0,
  DRS_CASE_NONMONOTONE_A = 1,
  DRS_CASE_UNSUPPORTED = 2,
} DrsCase;

typedef struct DrsPlan DrsPlan;

typedef struct DrsProblem DrsProblem;

typedef struct DrsRun DrsRun;

/**
 * Solver settings. NaN in `mu` or `lambda` means "not set".
 */
typedef struct DrsSolveOptions {
  double mu;
  double lambda;
  double tol;
  size_t max_iter;
  enum DrsVariant variant;
} DrsSolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null.
 *
 * The pointer stays valid until the next `drs_*` call on the same thread.
 */
const char *drs_last_error(void);

struct DrsSolveOptions drs_solve_options_default(void);

/**
 * Plans the largest certified step for `sigmas`.
 *
 * `weights` covers the first `m - 1` operators and may be null for equal
 * weights.
 *
 * # Safety
 * `sigmas` must point to `m` doubles, `weights` to `m - 1` doubles or be null,
 * and `out` must be a valid pointer.
 */
enum DrsStatus drs_plan_new(const double *sigmas,
                            const double *weights,
                            size_t m,
                            double mu,
                            struct DrsPlan **out);

/**
 * `λ̄*`; infinite in the monotone case. NaN for a null handle.
 *
 * # Safety
 * `plan` must be null or a handle from [`drs_plan_new`].
 */
double drs_plan_lambda_bar(const struct DrsPlan *plan);

/**
 * # Safety
 * `plan` must be a handle from [`drs_plan_new`].
 */
enum DrsCase drs_plan_case(const struct DrsPlan *plan);

/**
 * Writes up to `len` entries of `δ*` into `buf` and returns its full length.
 * Returns 0 in the monotone case.
 *
 * # Safety
 * `plan` must be a handle from [`drs_plan_new`]; `buf` must hold `len`
 * doubles or be null.
 */
size_t drs_plan_delta(const struct DrsPlan *plan, double *buf, size_t len);

/**
 * # Safety
 * `plan` must be null or a handle from [`drs_plan_new`] not yet freed.
 */
void drs_plan_free(struct DrsPlan *plan);

/**
 * The baseline equal-weight step.
 *
 * # Safety
 * `sigmas` must point to `m` doubles and `out` must be valid.
 */
enum DrsStatus drs_naive_stepsize(const double *sigmas, size_t m, double mu, double *out);

/**
 * Scalar prox of `kappa * phi(·, omega)` at `t`.
 *
 * # Safety
 * `out` must be valid.
 */
enum DrsStatus drs_prox_phi_scalar(double t, double omega, double kappa, double *out);

/**
 * Parses a problem from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated UTF-8 string and `out` must be valid.
 */
enum DrsStatus drs_problem_from_json(const char *json, struct DrsProblem **out);

/**
 * Number of operators in the problem, 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a handle from [`drs_problem_from_json`].
 */
size_t drs_problem_operator_count(const struct DrsProblem *problem);

/**
 * # Safety
 * `problem` must be null or a handle from [`drs_problem_from_json`] not yet freed.
 */
void drs_problem_free(struct DrsProblem *problem);

/**
 * Runs Douglas–Rachford on `problem`.
 *
 * An unset `lambda` falls back to the problem file, then to 0.95 `λ̄*`,
 * then to 1 when every operator is monotone. Reaching `max_iter` is not an
 * error; check [`drs_run_converged`].
 *
 * # Safety
 * `problem` must be a live handle, `options` valid or null for defaults,
 * and `out` valid.
 */
enum DrsStatus drs_solve(const struct DrsProblem *problem,
                         const struct DrsSolveOptions *options,
                         struct DrsRun **out);

/**
 * # Safety
 * `run` must be null or a handle from [`drs_solve`].
 */
size_t drs_run_iterations(const struct DrsRun *run);

/**
 * # Safety
 * `run` must be null or a handle from [`drs_solve`].
 */
bool drs_run_converged(const struct DrsRun *run);

/**
 * # Safety
 * `run` must be null or a handle from [`drs_solve`].
 */
double drs_run_residual(const struct DrsRun *run);

/**
 * The step `λ` actually used.
 *
 * # Safety
 * `run` must be null or a handle from [`drs_solve`].
 */
double drs_run_lambda(const struct DrsRun *run);

/**
 * Writes up to `len` shadow entries into `buf` and returns the full length.
 * Matrices are row-major.
 *
 * # Safety
 * `run` must be a handle from [`drs_solve`]; `buf` must hold `len` doubles
 * or be null.
 */
size_t drs_run_shadow(const struct DrsRun *run, double *buf, size_t len);

/**
 * Iterate log as CSV text, or null on failure. Release with [`drs_string_free`].
 *
 * # Safety
 * `run` must be a handle from [`drs_solve`].
 */
char *drs_run_log_csv(const struct DrsRun *run);

/**
 * # Safety
 * `run` must be null or a handle from [`drs_solve`] not yet freed.
 */
void drs_run_free(struct DrsRun *run);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void drs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DRSPLIT_H */
