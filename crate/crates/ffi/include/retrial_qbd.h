#ifndef RETRIAL_QBD_H
#define RETRIAL_QBD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum {
  RQBD_STATUS_OK = 0,
  RQBD_STATUS_NULL_POINTER = 1,
  RQBD_STATUS_INVALID_PARAMETER = 2,
  RQBD_STATUS_UNSTABLE = 3,
  RQBD_STATUS_NO_CONVERGENCE = 4,
  RQBD_STATUS_TRUNCATION_OVERFLOW = 5,
  RQBD_STATUS_NUMERICAL_ERROR = 6,
  RQBD_STATUS_OUT_OF_RANGE = 7,
  RQBD_STATUS_PANIC = 8,
} RqbdStatus;

/**
 * Opaque parameter handle.
 */
typedef struct RqbdParams RqbdParams;

/**
 * Opaque solution handle: truncated stationary distribution plus the
 * parameters it was solved for.
 */
typedef struct RqbdSolution RqbdSolution;

/**
 * Flat performance summary; mirrors the library's report.
 */
typedef struct {
  double rho;
  uintptr_t n_trunc;
  double blocking_low;
  double blocking_high;
  double mean_busy;
  double little_error;
  double tail_exponent;
  double boundary_residual;
  /**
   * 1 when the boundary vector came from the dense fallback solve.
   */
  int32_t boundary_fallback;
} RqbdReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a parameter handle from explicit rates. On success writes the
 * handle to `out` and returns Ok; `out` is untouched otherwise.
 */
RqbdStatus rqbd_params_new(uintptr_t c,
                           double lambda1,
                           double lambda2,
                           double mu,
                           double nu,
                           RqbdParams **out);

/**
 * Creates a parameter handle from traffic intensity rho = lambda/(c nu) and
 * the split ratio lambda2/lambda1.
 */
RqbdStatus rqbd_params_from_rho(uintptr_t c,
                                double rho,
                                double ratio21,
                                double mu,
                                double nu,
                                RqbdParams **out);

/**
 * Frees a parameter handle. Null is a no-op.
 */
void rqbd_params_free(RqbdParams *params);

/**
 * Solves for the stationary distribution. `n_max` = 0 selects the
 * truncation point automatically from `eps_trunc`.
 */
RqbdStatus rqbd_solve(const RqbdParams *params,
                      double eps_rate,
                      double eps_trunc,
                      uintptr_t n_max,
                      RqbdSolution **out);

/**
 * Frees a solution handle. Null is a no-op.
 */
void rqbd_solution_free(RqbdSolution *solution);

/**
 * Truncation point N of a solution.
 */
RqbdStatus rqbd_solution_n_trunc(const RqbdSolution *solution, uintptr_t *out);

/**
 * Stationary probability of orbit size n with i channels busy.
 */
RqbdStatus rqbd_solution_prob(const RqbdSolution *solution, uintptr_t n, uintptr_t i, double *out);

/**
 * Fills the performance summary for a solution.
 */
RqbdStatus rqbd_solution_report(const RqbdSolution *solution, RqbdReport *out);

/**
 * Writes the two nonzero rows of the converged rate matrix at level n into
 * caller-provided buffers of length c + 1 each.
 */
RqbdStatus rqbd_rate_rows(const RqbdParams *params,
                          uintptr_t n,
                          double eps_rate,
                          double *row_blocked,
                          double *row_full,
                          uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RETRIAL_QBD_H */
