#ifndef FRAC_CAUCHY_H
#define FRAC_CAUCHY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FcFamily {
  FC_FAMILY_SEMIGROUP = 0,
  FC_FAMILY_MITTAG_LEFFLER = 1,
  FC_FAMILY_MITTAG_LEFFLER_ALPHA = 2,
} FcFamily;

typedef enum FcNonlinearity {
  FC_NONLINEARITY_ZERO = 0,
  // `f(u) = l·u` with the scalar `param_re + i·param_im`.
  FC_NONLINEARITY_LINEAR = 1,
  // `f(u) = c·(u∘u)` with `c = param_re + i·param_im`.
  FC_NONLINEARITY_QUADRATIC = 2,
  FC_NONLINEARITY_LOGISTIC = 3,
} FcNonlinearity;

typedef enum FcSolveStatus {
  FC_SOLVE_STATUS_COMPLETED = 0,
  FC_SOLVE_STATUS_BLOWUP = 1,
  FC_SOLVE_STATUS_PICARD_FAILURE = 2,
} FcSolveStatus;

typedef enum FcStatus {
  FC_STATUS_OK = 0,
  FC_STATUS_NULL_POINTER = 1,
  FC_STATUS_INVALID_ARGUMENT = 2,
  FC_STATUS_SINGULAR_MATRIX = 3,
  FC_STATUS_NO_CONVERGENCE = 4,
  FC_STATUS_DOMAIN_ERROR = 5,
  FC_STATUS_NOT_SECTORIAL = 6,
  FC_STATUS_CONTOUR_ERROR = 7,
  FC_STATUS_CONFIG_ERROR = 8,
  FC_STATUS_IO = 9,
  FC_STATUS_PANIC = 10,
} FcStatus;

typedef struct FcEvaluator FcEvaluator;

typedef struct FcMatrix FcMatrix;

typedef struct FcSolution FcSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *fc_version(void);

// Message of the last failure on this thread, or NULL. Valid until the next failing call.
const char *fc_last_error(void);

// Build an `n × n` matrix from row-major real and imaginary parts. `im` may be NULL.
//
// # Safety
// `re` (and `im` when non-null) must point to `n*n` doubles; `out` must be writable.
enum FcStatus fc_matrix_new(size_t n, const double *re, const double *im, struct FcMatrix **out);

// # Safety
// `m` must be NULL or a handle from `fc_matrix_new` not yet freed.
void fc_matrix_free(struct FcMatrix *m);

// Dimension of a matrix handle, or 0 for NULL.
//
// # Safety
// `m` must be NULL or a live handle.
size_t fc_matrix_dim(const struct FcMatrix *m);

// Sample the resolvent on the sector of half-angle `theta` (pass 0 for the default).
// Writes the constant `M_θ`; returns `NotSectorial` if the certificate is rejected.
//
// # Safety
// `m` must be a live handle; `m_theta` must be writable.
enum FcStatus fc_certify(const struct FcMatrix *m, double theta, double *m_theta);

// Certify `m` at the default angle and set up a contour evaluator for one family.
// `alpha` is ignored for the semigroup.
//
// # Safety
// `m` must be a live handle; `out` must be writable.
enum FcStatus fc_evaluator_new(const struct FcMatrix *m,
                               enum FcFamily family,
                               double alpha,
                               struct FcEvaluator **out);

// # Safety
// `ev` must be NULL or a live evaluator handle.
void fc_evaluator_free(struct FcEvaluator *ev);

// Evaluate the family at `t >= 0`, writing `n*n` row-major entries to `re` and `im`.
//
// # Safety
// `ev` must be live; `re` and `im` must each hold `n*n` doubles.
enum FcStatus fc_evaluator_eval(const struct FcEvaluator *ev, double t, double *re, double *im);

// Solve the mild problem on `[0, horizon]` with uniform `step`.
// `param_re/param_im` is the coefficient for `Linear` and `Quadratic`; `lipschitz_radius <= 0` selects the default.
//
// # Safety
// `m` must be live; `u0_re` (and `u0_im` when non-null) must hold `n` doubles; `out` must be writable.
enum FcStatus fc_solve(const struct FcMatrix *m,
                       const double *u0_re,
                       const double *u0_im,
                       double alpha,
                       enum FcNonlinearity nonlinearity,
                       double param_re,
                       double param_im,
                       double lipschitz_radius,
                       double horizon,
                       double step,
                       struct FcSolution **out);

// # Safety
// `s` must be NULL or a live solution handle.
void fc_solution_free(struct FcSolution *s);

// Number of stored time points (including `t = 0`), or 0 for NULL.
//
// # Safety
// `s` must be NULL or a live handle.
size_t fc_solution_len(const struct FcSolution *s);

// Termination status; for blow-up and Picard failure `at` receives the time reported.
//
// # Safety
// `s` must be live; `at` may be NULL.
enum FcStatus fc_solution_status(const struct FcSolution *s,
                                 enum FcSolveStatus *status,
                                 double *at);

// Read time point `index`: its time and `n` state components.
//
// # Safety
// `s` must be live; `t` must be writable; `re` and `im` must each hold `n` doubles.
enum FcStatus fc_solution_get(const struct FcSolution *s,
                              size_t index,
                              double *t,
                              double *re,
                              double *im);

// Run a JSON config exactly like the command-line tool, writing outputs to `out_dir`.
// `exit_code` receives the CLI exit code (0 success, 2 rejected certificate or partial sweep).
//
// # Safety
// `config_json` and `out_dir` must be NUL-terminated strings; `exit_code` must be writable.
enum FcStatus fc_run_config(const char *config_json, const char *out_dir, int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRAC_CAUCHY_H */
