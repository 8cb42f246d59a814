#ifndef CHAIN_LAB_H
#define CHAIN_LAB_H

/* Generated with cbindgen:0.26.0 */

/* Generated with cbindgen from the chain-lab-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Success.
 */
#define CHAIN_LAB_OK 0

/**
 * A required pointer argument was null.
 */
#define CHAIN_LAB_NULL_POINTER -1

/**
 * An argument was out of range or inconsistent.
 */
#define CHAIN_LAB_INVALID_ARGUMENT -2

/**
 * A numerical routine failed (eigensolver, stability guard, fit, ...).
 */
#define CHAIN_LAB_NUMERICAL_ERROR -3

/**
 * An internal invariant broke; the library caught a panic.
 */
#define CHAIN_LAB_PANIC -4

/**
 * Evolve the raw Gaussian state.
 */
#define CHAIN_LAB_PROJECT_NONE 0

/**
 * Project the initial state onto the conserved subspace first.
 */
#define CHAIN_LAB_PROJECT_CONSERVED 1

/**
 * Project the initial state onto the decaying subspace first.
 */
#define CHAIN_LAB_PROJECT_DECAYING 2

/**
 * Opaque chain-parameter handle.
 */
typedef struct ChainLabParams ChainLabParams;

/**
 * Opaque sampled-trajectory handle.
 */
typedef struct ChainLabTrajectory ChainLabTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the most recent error message of this thread into `buffer`
 * (NUL-terminated, truncated to `capacity`).
 *
 * Returns the full message length in bytes, excluding the terminator;
 * 0 means no error has been recorded yet. `buffer` may be null to query
 * the length alone.
 */
size_t chain_lab_last_error(char *buffer, size_t capacity);

/**
 * Conserved phase-space dimension `D_n(N) = gcd(N, 2n−1) − 1`.
 */
int32_t chain_lab_dimension(uint64_t particles, uint64_t site, uint64_t *out_dimension);

/**
 * Site-averaged conserved dimension `S(N)`.
 */
int32_t chain_lab_mean_dimension(uint64_t particles, double *out_mean);

/**
 * Cumulative average `(1/N₀) Σ_{N ≤ N₀} S(N)/N` and its ratio to `ln N₀`.
 */
int32_t chain_lab_cumulative_average(uint64_t n0, double *out_cumulative, double *out_ratio_to_log);

/**
 * Creates a chain-parameter handle; all stiffnesses and the friction must
 * be positive and `1 ≤ damped_site ≤ particles`. Free with
 * [`chain_lab_params_free`].
 */
int32_t chain_lab_params_new(uint64_t particles,
                             uint64_t damped_site,
                             double alpha,
                             double omega0,
                             double omega1,
                             struct ChainLabParams **out_params);

/**
 * Releases a parameter handle; accepts null.
 */
void chain_lab_params_free(struct ChainLabParams *params);

/**
 * Conserved dimension by the spectral route (exact congruence count).
 */
int32_t chain_lab_dimension_spectral(const struct ChainLabParams *params, uint64_t *out_dimension);

/**
 * Conserved dimension by the Krylov route (`2N − 2·rank`).
 */
int32_t chain_lab_dimension_krylov(const struct ChainLabParams *params, uint64_t *out_dimension);

/**
 * Writes the `N` closed-form stiffness eigenvalues, ascending, into
 * `out_eigenvalues`; `capacity` must be at least `N`.
 */
int32_t chain_lab_spectrum(const struct ChainLabParams *params,
                           double *out_eigenvalues,
                           size_t capacity);

/**
 * Theoretical decay rate `c₂ = −2·max Re λ` of the drift restricted to the
 * decaying subspace.
 */
int32_t chain_lab_decay_rate(const struct ChainLabParams *params, double *out_rate);

/**
 * Evolves a seeded Gaussian state by exact propagation and returns a
 * trajectory handle (free with [`chain_lab_trajectory_free`]).
 *
 * `t_end ≤ 0` selects the default horizon `40/c₂`; `dt ≤ 0` selects the
 * default sampling step `0.1/√λ_max`. `project` is one of the
 * `CHAIN_LAB_PROJECT_*` constants.
 */
int32_t chain_lab_simulate(const struct ChainLabParams *params,
                           uint64_t seed,
                           double t_end,
                           double dt,
                           int32_t project_mode,
                           struct ChainLabTrajectory **out_trajectory);

/**
 * Number of samples in a trajectory; 0 for null.
 */
size_t chain_lab_trajectory_len(const struct ChainLabTrajectory *trajectory);

/**
 * Borrowed pointer to the sample times (length [`chain_lab_trajectory_len`]);
 * valid until the handle is freed. Null for null input.
 */
const double *chain_lab_trajectory_times(const struct ChainLabTrajectory *trajectory);

/**
 * Borrowed pointer to the sampled energies `H(t)`.
 */
const double *chain_lab_trajectory_energies(const struct ChainLabTrajectory *trajectory);

/**
 * Borrowed pointer to the sampled dissipation powers `−αpₙ²(t)`.
 */
const double *chain_lab_trajectory_powers(const struct ChainLabTrajectory *trajectory);

/**
 * Log-linear decay fit of the trajectory's trailing window
 * `[skip_fraction·t_end, t_end]`; writes the rate, prefactor and r².
 */
int32_t chain_lab_trajectory_fit(const struct ChainLabTrajectory *trajectory,
                                 double skip_fraction,
                                 double *out_c2,
                                 double *out_c1,
                                 double *out_r_squared);

/**
 * Releases a trajectory handle; accepts null.
 */
void chain_lab_trajectory_free(struct ChainLabTrajectory *trajectory);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* CHAIN_LAB_H */
