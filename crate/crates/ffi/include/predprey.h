#ifndef PREDPREY_H
#define PREDPREY_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define PP_OK 0

#define PP_NULL_POINTER -1

#define PP_INVALID_PARAMS -2

#define PP_DOMAIN -3

#define PP_PRECONDITION -4

#define PP_INTEGRATION -5

#define PP_OUT_OF_RANGE -6

#define PP_PANIC -7

#define PP_INVALID_OPTIONS -8

#define PP_NOT_FOUND -9

#define PP_TERM_HORIZON 0

#define PP_TERM_PREY_EXTINCT 1

#define PP_TERM_PREDATOR_EXTINCT 2

#define PP_TERM_STOPPED 3

#define PP_TERM_STEP_FAILURE 4

// Interior equilibria with their linearization.
typedef struct PpEquilibria PpEquilibria;

// Validated model parameters.
typedef struct PpParams PpParams;

// A computed trajectory.
typedef struct PpTrajectory PpTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or "" after a success.
// The pointer stays valid until the next call on the same thread.
const char *pp_last_error_message(void);

// Validates parameters and creates a handle. `r` is the refuge factor; pass
// 1 for no refuge.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle pointer.
int32_t pp_params_new(double a1,
                      double a2,
                      double b1,
                      double w0,
                      double w1,
                      double d,
                      double m1,
                      double m2,
                      double r,
                      struct PpParams **out);

// # Safety
// `p` must be null or a handle from `pp_params_new` not yet freed.
void pp_params_free(struct PpParams *p);

// Carrying capacity `a1 / b1`.
//
// # Safety
// Pointers must be valid or null.
int32_t pp_params_carrying_capacity(const struct PpParams *p, double *out);

// Vector field at `(x1, x2)`.
//
// # Safety
// Pointers must be valid or null.
int32_t pp_rhs(const struct PpParams *p, double x1, double x2, double *dx1, double *dx2);

// Integrates from `(x1, x2)` up to `horizon` with default tolerances.
//
// # Safety
// Pointers must be valid or null.
int32_t pp_integrate(const struct PpParams *p,
                     double x1,
                     double x2,
                     double horizon,
                     struct PpTrajectory **out);

// # Safety
// `t` must be null or a handle from `pp_integrate` not yet freed.
void pp_trajectory_free(struct PpTrajectory *t);

// Number of stored samples.
//
// # Safety
// Pointers must be valid or null.
int32_t pp_trajectory_len(const struct PpTrajectory *t, size_t *out);

// Sample `i` as `(t, x1, x2)`.
//
// # Safety
// Pointers must be valid or null.
int32_t pp_trajectory_get(const struct PpTrajectory *t,
                          size_t i,
                          double *time,
                          double *x1,
                          double *x2);

// Termination kind (`PP_TERM_*`) and event time (NaN for the horizon).
//
// # Safety
// Pointers must be valid or null.
int32_t pp_trajectory_termination(const struct PpTrajectory *t, int32_t *kind, double *time);

// Interior equilibria, sorted by `x1`.
//
// # Safety
// Pointers must be valid or null.
int32_t pp_interior_equilibria(const struct PpParams *p, struct PpEquilibria **out);

// # Safety
// `e` must be null or a handle from `pp_interior_equilibria` not yet freed.
void pp_equilibria_free(struct PpEquilibria *e);

// # Safety
// Pointers must be valid or null.
int32_t pp_equilibria_len(const struct PpEquilibria *e, size_t *out);

// Equilibrium `i`: location, Jacobian trace and determinant.
//
// # Safety
// Pointers must be valid or null.
int32_t pp_equilibria_get(const struct PpEquilibria *e,
                          size_t i,
                          double *x1,
                          double *x2,
                          double *trace,
                          double *det);

// Predator bound `K2` for prey margin `eps1`.
//
// # Safety
// Pointers must be valid or null.
int32_t pp_dissipative_bound_k2(const struct PpParams *p, double eps1, double *out);

// Refuge level below which prey starting at `x1_0` persists, given `K2`.
//
// # Safety
// Pointers must be valid or null.
int32_t pp_refuge_threshold(const struct PpParams *p, double x1_0, double k2, double *out);

// Whether initial prey `x1_0` meets the finite-time extinction condition
// (`*met` is 1 or 0).
//
// # Safety
// Pointers must be valid or null.
int32_t pp_extinction_criterion(const struct PpParams *p, double x1_0, int32_t *met);

// Critical `a1` of the Hopf point, iterating from `a1_start` and the
// equilibrium near `(x1, x2)`.
//
// # Safety
// Pointers must be valid or null.
int32_t pp_hopf_critical_a1(const struct PpParams *p,
                            double a1_start,
                            double x1,
                            double x2,
                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PREDPREY_H */
