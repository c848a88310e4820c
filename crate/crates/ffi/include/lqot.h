/* Generated by cbindgen. Do not edit. */

#ifndef LQOT_H
#define LQOT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Values 1 to 14 match the library error kinds.
 */
typedef enum LqotStatus {
  LQOT_STATUS_OK = 0,
  LQOT_STATUS_DIMENSION = 1,
  LQOT_STATUS_NON_FINITE = 2,
  LQOT_STATUS_NOT_SPD = 3,
  LQOT_STATUS_SINGULAR = 4,
  LQOT_STATUS_CONJUGATE_TIME = 5,
  LQOT_STATUS_INVALID_PROBLEM = 6,
  LQOT_STATUS_ARGUMENT = 7,
  LQOT_STATUS_GUARD = 8,
  LQOT_STATUS_WINDOW = 9,
  LQOT_STATUS_INTEGRATION = 10,
  LQOT_STATUS_INTERPOLATION = 11,
  LQOT_STATUS_SOLVER = 12,
  LQOT_STATUS_IO = 13,
  LQOT_STATUS_PARSE = 14,
  LQOT_STATUS_NULL_POINTER = 100,
  LQOT_STATUS_INVALID_UTF8 = 101,
  LQOT_STATUS_PANIC = 102,
} LqotStatus;

/**
 * Opaque handle to a validated LQ problem.
 */
typedef struct LqotProblem LqotProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into the library on this thread.
 */
const char *lqot_last_error_message(void);

/**
 * Builds a problem from row-major `A` (n x n), `B` (n x m), `Q` (n x n).
 */
enum LqotStatus lqot_problem_new(size_t n,
                                 size_t m,
                                 const double *a,
                                 const double *b,
                                 const double *q,
                                 double horizon,
                                 struct LqotProblem **out);

/**
 * Builds a problem from a JSON document `{"A", "B", "Q", "T"}`.
 */
enum LqotStatus lqot_problem_from_json(const char *json, struct LqotProblem **out);

/**
 * Releases a handle. Null is ignored.
 */
void lqot_problem_free(struct LqotProblem *problem);

/**
 * State dimension, or 0 for a null handle.
 */
size_t lqot_problem_dim(const struct LqotProblem *problem);

/**
 * Horizon `T`, or NaN for a null handle.
 */
double lqot_problem_horizon(const struct LqotProblem *problem);

/**
 * Writes the four n x n flow blocks at `tau`.
 */
enum LqotStatus lqot_flow_blocks(const struct LqotProblem *problem,
                                 double tau,
                                 double *r1,
                                 double *r2,
                                 double *r3,
                                 double *r4);

/**
 * First conjugate time in `(0, search_horizon]`; `*found` is false when
 * there is none.
 */
enum LqotStatus lqot_first_conjugate_time(const struct LqotProblem *problem,
                                          double search_horizon,
                                          double grid_step,
                                          double *time,
                                          bool *found);

/**
 * Writes the n x n matrices of `c(x, y) = x.Cx/2 + x.Dy + y.Ey/2` on `[t, s]`.
 */
enum LqotStatus lqot_cost_matrices(const struct LqotProblem *problem,
                                   double t,
                                   double s,
                                   double *c,
                                   double *d,
                                   double *e);

/**
 * `c^{t,s}(x, y)` for length-n vectors.
 */
enum LqotStatus lqot_cost_eval(const struct LqotProblem *problem,
                               double t,
                               double s,
                               const double *x,
                               const double *y,
                               double *value);

/**
 * Endpoint `R3(tau) p + R4(tau) x` of the extremal with initial costate `p`.
 */
enum LqotStatus lqot_exp_map(const struct LqotProblem *problem,
                             const double *x,
                             const double *costate,
                             double tau,
                             double *out);

/**
 * Distortion coefficient `det R3(tau) / det R3(T)`.
 */
enum LqotStatus lqot_distortion(const struct LqotProblem *problem, double tau, double *beta);

/**
 * Reference model-space coefficient for curvature sign `k`, dimension `n`.
 */
enum LqotStatus lqot_model_beta(double k, size_t n, double theta, double tau, double *beta);

/**
 * Optimal plan between discrete measures on `[0, T]`. Points are row-major
 * (`n_source x dim`, `n_target x dim`); `plan` receives `n_source x n_target`
 * row-major masses.
 */
enum LqotStatus lqot_solve_kantorovich(const struct LqotProblem *problem,
                                       size_t n_source,
                                       const double *source_points,
                                       const double *source_weights,
                                       size_t n_target,
                                       const double *target_points,
                                       const double *target_weights,
                                       double *plan,
                                       double *total_cost);

/**
 * Optimal affine map `x -> linear x + offset` between Gaussians on `[0, T]`.
 */
enum LqotStatus lqot_gaussian_map(const struct LqotProblem *problem,
                                  const double *mu_mean,
                                  const double *mu_cov,
                                  const double *nu_mean,
                                  const double *nu_cov,
                                  double *linear,
                                  double *offset);

/**
 * Runs a verification suite with default tolerances. `*report` receives a
 * JSON string to release with [`lqot_string_free`]; `*passed` the verdict.
 */
enum LqotStatus lqot_verify(const struct LqotProblem *problem,
                            const char *suite,
                            uint64_t seed,
                            char **report,
                            bool *passed);

/**
 * Releases a string returned by the library. Null is ignored.
 */
void lqot_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LQOT_H */
