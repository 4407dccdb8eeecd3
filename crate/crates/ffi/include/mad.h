#ifndef MAD_H
#define MAD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum MadStatus {
  MAD_STATUS_OK = 0,
  MAD_STATUS_NULL_POINTER = 1,
  MAD_STATUS_INVALID_ARGUMENT = 2,
  MAD_STATUS_ARM_OUT_OF_RANGE = 3,
  MAD_STATUS_DOMAIN = 4,
  MAD_STATUS_INVALID_STATE = 5,
  MAD_STATUS_BUFFER_TOO_SMALL = 6,
  MAD_STATUS_PANIC = 7,
} MadStatus;

/**
 * Underlying bandit policy.
 */
typedef enum MadPolicy {
  MAD_POLICY_UNIFORM = 0,
  MAD_POLICY_BETA_THOMPSON = 1,
  MAD_POLICY_GAUSSIAN_THOMPSON = 2,
  MAD_POLICY_UCB1 = 3,
} MadPolicy;

/**
 * Design family; `a` and `c` in [`MadDesign`] are read only where listed.
 */
typedef enum MadDesignKind {
  /**
   * `delta = 1`.
   */
  MAD_DESIGN_KIND_BERNOULLI = 0,
  /**
   * `delta = 0`.
   */
  MAD_DESIGN_KIND_STANDARD_BANDIT = 1,
  /**
   * `delta_t = t^-a`.
   */
  MAD_DESIGN_KIND_POWER = 2,
  /**
   * `delta_t = c`.
   */
  MAD_DESIGN_KIND_CONSTANT = 3,
  /**
   * `delta_t = max(t^-a, c)`.
   */
  MAD_DESIGN_KIND_CLIPPED_MAX = 4,
  /**
   * `delta_t = min(t^-a, c)`.
   */
  MAD_DESIGN_KIND_CLIPPED_MIN = 5,
} MadDesignKind;

/**
 * Opaque online session.
 */
typedef struct MadSession MadSession;

typedef struct MadDesign {
  enum MadDesignKind kind;
  double a;
  double c;
} MadDesign;

/**
 * Current confidence-sequence interval.
 */
typedef struct MadInterval {
  double center;
  double radius;
  double s_hat;
  uint64_t units;
} MadInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Create a session. `mc_draws` is used only for Thompson sampling with more
 * than two arms. On success `*out` owns the new handle.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum MadStatus mad_session_new(size_t n_arms,
                               enum MadPolicy policy,
                               struct MadDesign design,
                               size_t mc_draws,
                               uint64_t seed,
                               struct MadSession **out);

/**
 * Release a session. Null is ignored.
 *
 * # Safety
 * `session` must be null or a handle from [`mad_session_new`] not yet freed.
 */
void mad_session_free(struct MadSession *session);

/**
 * Number of arms, or 0 for a null handle.
 *
 * # Safety
 * `session` must be null or a live handle.
 */
size_t mad_session_n_arms(const struct MadSession *session);

/**
 * Units whose outcomes have been observed, or 0 for a null handle.
 *
 * # Safety
 * `session` must be null or a live handle.
 */
uint64_t mad_session_units(const struct MadSession *session);

/**
 * Assign the next unit. Writes the arm to `*arm` and, when `probs` is not
 * null, the `probs_len >= n_arms` assignment probabilities. Repeated calls
 * before [`mad_session_observe`] return the same assignment.
 *
 * # Safety
 * `session` must be a live handle, `arm` valid for writes, and `probs`
 * null or valid for `probs_len` writes.
 */
enum MadStatus mad_session_assign(struct MadSession *session,
                                  size_t *arm,
                                  double *probs,
                                  size_t probs_len);

/**
 * Report the outcome of the pending assignment.
 *
 * # Safety
 * `session` must be a live handle.
 */
enum MadStatus mad_session_observe(struct MadSession *session, double outcome);

/**
 * Asymptotic confidence sequence for arm `w` minus arm `w_prime` after the
 * observed units. `eta <= 0` derives `eta` from `t_star`.
 *
 * # Safety
 * `session` must be a live handle and `out` valid for writes.
 */
enum MadStatus mad_session_interval(const struct MadSession *session,
                                    size_t w,
                                    size_t w_prime,
                                    double alpha,
                                    double eta,
                                    uint64_t t_star,
                                    struct MadInterval *out);

/**
 * Asymptotic radius for intrinsic time `s_hat` after `t` units.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum MadStatus mad_asymptotic_radius(double s_hat,
                                     uint64_t t,
                                     double eta,
                                     double alpha,
                                     double *out);

/**
 * `eta` that makes the radius tightest at intrinsic time `t_star`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum MadStatus mad_eta_for_horizon(double alpha, uint64_t t_star, double *out);

/**
 * `out[i] = delta / len + (1 - delta) * probs[i]`.
 *
 * # Safety
 * `probs` and `out` must each be valid for `len` values; they may alias.
 */
enum MadStatus mad_mix(double delta, const double *probs, size_t len, double *out);

/**
 * Mixing weight of `design` at unit (or batch) index `t >= 1`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum MadStatus mad_delta(struct MadDesign design, uint64_t t, double *out);

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` writes.
 */
size_t mad_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mad_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAD_H */
