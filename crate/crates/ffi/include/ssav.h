#ifndef SSAV_H
#define SSAV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum SsavStatus {
  SSAV_STATUS_OK = 0,
  SSAV_STATUS_NULL_POINTER = 1,
  SSAV_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The auxiliary-variable radicand fell below 1; C_H is too small.
   */
  SSAV_STATUS_ASSUMPTION_VIOLATION = 3,
  /**
   * Malformed JSON or an unknown potential.
   */
  SSAV_STATUS_PARSE = 4,
  SSAV_STATUS_NO_CONVERGENCE = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  SSAV_STATUS_PANIC = 6,
  SSAV_STATUS_INTERNAL = 7,
} SsavStatus;

/**
 * A validated model: potential, parameters and noise matrix.
 */
typedef struct SsavModel SsavModel;

/**
 * A single path advanced with the scheme and its own keyed noise stream.
 */
typedef struct SsavSampler SsavSampler;

/**
 * An augmented state (v, u, ρ).
 */
typedef struct SsavState SsavState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or null. Valid until the next failing call.
 */
const char *ssav_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ssav_version(void);

/**
 * Builds a model from a JSON configuration string.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SsavStatus ssav_model_from_json(const char *json, struct SsavModel **out);

/**
 * # Safety
 * `model` must come from [`ssav_model_from_json`] and not be used afterwards. Null is ignored.
 */
void ssav_model_free(struct SsavModel *model);

/**
 * Dimension m of the model, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t ssav_model_dim(const struct SsavModel *model);

/**
 * H(v, u) = |v|²/2 + κΦ(u).
 *
 * # Safety
 * `v` and `u` must point to `len` doubles; `out` must be valid.
 */
enum SsavStatus ssav_hamiltonian(const struct SsavModel *model,
                                 const double *v,
                                 const double *u,
                                 size_t len,
                                 double *out);

/**
 * ρ = √(κΦ(u) + C_H − α|u|²); fails with `AssumptionViolation` when the radicand is below 1.
 *
 * # Safety
 * `u` must point to `len` doubles; `out` must be valid.
 */
enum SsavStatus ssav_rho_init(const struct SsavModel *model,
                              const double *u,
                              size_t len,
                              double *out);

/**
 * New state (v, u) with ρ initialized from u.
 *
 * # Safety
 * `v` and `u` must point to `len` doubles; `out` must be valid.
 */
enum SsavStatus ssav_state_new(const struct SsavModel *model,
                               const double *v,
                               const double *u,
                               size_t len,
                               struct SsavState **out);

/**
 * Copies the state into caller buffers of length `len`.
 *
 * # Safety
 * Buffers must hold `len` doubles; `rho_out` must be valid.
 */
enum SsavStatus ssav_state_get(const struct SsavState *state,
                               double *v_out,
                               double *u_out,
                               size_t len,
                               double *rho_out);

/**
 * # Safety
 * `state` must come from [`ssav_state_new`] and not be used afterwards. Null is ignored.
 */
void ssav_state_free(struct SsavState *state);

/**
 * Modified energy |v|²/2 + α|u|² + ρ² of a state.
 *
 * # Safety
 * Handles must be live; `out` must be valid.
 */
enum SsavStatus ssav_modified_energy(const struct SsavModel *model,
                                     const struct SsavState *state,
                                     double *out);

/**
 * Replaces the state with the explicit energy-conserving substep of size `h`.
 *
 * # Safety
 * Handles must be live.
 */
enum SsavStatus ssav_deterministic_substep(const struct SsavModel *model,
                                           struct SsavState *state,
                                           double h);

/**
 * One full step with caller-supplied raw noise: `ou_integral` is ∫ e^{−γ(t_{n+1}−s)} dW_s
 * and `wiener_increment` is the Brownian increment, both before the noise matrix is applied.
 *
 * # Safety
 * Handles must be live; noise buffers must hold `len` doubles.
 */
enum SsavStatus ssav_step(const struct SsavModel *model,
                          struct SsavState *state,
                          double h,
                          const double *ou_integral,
                          const double *wiener_increment,
                          size_t len);

/**
 * Sampler starting from a copy of `state`, drawing noise keyed by `(seed, path)`.
 * Two samplers with the same key and stepsize produce bitwise identical paths.
 *
 * # Safety
 * Handles must be live; `out` must be valid.
 */
enum SsavStatus ssav_sampler_new(const struct SsavModel *model,
                                 const struct SsavState *state,
                                 double h,
                                 uint64_t seed,
                                 uint64_t path,
                                 struct SsavSampler **out);

/**
 * Advances the sampler by `n_steps`. On failure the state is left at the last good step.
 *
 * # Safety
 * `sampler` must be live.
 */
enum SsavStatus ssav_sampler_advance(struct SsavSampler *sampler, uint64_t n_steps);

/**
 * Steps taken so far, or 0 for a null handle.
 *
 * # Safety
 * `sampler` must be null or live.
 */
uint64_t ssav_sampler_steps(const struct SsavSampler *sampler);

/**
 * Copies the sampler's current state into caller buffers.
 *
 * # Safety
 * Buffers must hold `len` doubles; `rho_out` must be valid.
 */
enum SsavStatus ssav_sampler_state(const struct SsavSampler *sampler,
                                   double *v_out,
                                   double *u_out,
                                   size_t len,
                                   double *rho_out);

/**
 * # Safety
 * `sampler` must come from [`ssav_sampler_new`] and not be used afterwards. Null is ignored.
 */
void ssav_sampler_free(struct SsavSampler *sampler);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSAV_H */
