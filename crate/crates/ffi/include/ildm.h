#ifndef ILDM_H
#define ILDM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum IldmStatus {
  ILDM_STATUS_OK = 0,
  ILDM_STATUS_NULL_POINTER = 1,
  ILDM_STATUS_INVALID_UTF8 = 2,
  ILDM_STATUS_PARSE = 3,
  ILDM_STATUS_VALIDATION = 4,
  ILDM_STATUS_CONFIG = 5,
  ILDM_STATUS_SOLVER = 6,
  ILDM_STATUS_OUT_OF_RANGE = 7,
  ILDM_STATUS_IO = 8,
  ILDM_STATUS_PANIC = 9,
} IldmStatus;

// A demonstration dataset bound to the MDP it was created against.
typedef struct IldmDemo IldmDemo;

// An MDP.
typedef struct IldmMdp IldmMdp;

// The output of one learner run.
typedef struct IldmSolveResult IldmSolveResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null if none.
// The pointer stays valid until the next failing call on this thread.
const char *ildm_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ildm_version(void);

// Parses and validates an MDP from JSON.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
enum IldmStatus ildm_mdp_from_json(const char *json, struct IldmMdp **out);

// Loads and validates an MDP from a JSON file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum IldmStatus ildm_mdp_load(const char *path, struct IldmMdp **out);

// Builds Reset Cliff and draws `N` expert demonstrations with `seed`.
//
// # Safety
// `mdp_out` and `demo_out` must be writable pointers.
enum IldmStatus ildm_reset_cliff(size_t S,
                                 size_t A,
                                 size_t H,
                                 size_t N,
                                 uint64_t seed,
                                 struct IldmMdp **mdp_out,
                                 struct IldmDemo **demo_out);

// Horizon of `mdp`, or 0 if it is null.
//
// # Safety
// `mdp` must be null or a live handle.
size_t ildm_mdp_horizon(const struct IldmMdp *mdp);

// Hex SHA-256 of the MDP's canonical JSON; free with [`ildm_string_free`].
//
// # Safety
// `mdp` must be a live handle and `out` a writable pointer.
enum IldmStatus ildm_mdp_hash(const struct IldmMdp *mdp, char **out);

// Releases an MDP handle; null is ignored.
//
// # Safety
// `mdp` must be null or a handle not yet freed.
void ildm_mdp_free(struct IldmMdp *mdp);

// Parses a demo file's JSON and checks it against `mdp`.
//
// # Safety
// `mdp` must be a live handle, `json` a NUL-terminated string, `out` writable.
enum IldmStatus ildm_demo_from_json(const struct IldmMdp *mdp,
                                    const char *json,
                                    struct IldmDemo **out);

// Number of trajectories in `demo`, or 0 if it is null.
//
// # Safety
// `demo` must be null or a live handle.
size_t ildm_demo_len(const struct IldmDemo *demo);

// Releases a demo handle; null is ignored.
//
// # Safety
// `demo` must be null or a handle not yet freed.
void ildm_demo_free(struct IldmDemo *demo);

// Runs `method` (for example `"dual_qdm_exact"`). `config_json` is a solver
// config object in JSON, or null for defaults.
//
// # Safety
// Handles must be live, strings NUL-terminated or null where allowed, `out` writable.
enum IldmStatus ildm_solve(const struct IldmMdp *mdp,
                           const struct IldmDemo *demo,
                           const char *method,
                           const char *config_json,
                           struct IldmSolveResult **out);

// Whether the solver met its stopping criterion; false for null.
//
// # Safety
// `res` must be null or a live handle.
bool ildm_result_converged(const struct IldmSolveResult *res);

// Iterations taken; 0 for null.
//
// # Safety
// `res` must be null or a live handle.
size_t ildm_result_iters(const struct IldmSolveResult *res);

// Final objective value; NaN for null.
//
// # Safety
// `res` must be null or a live handle.
double ildm_result_objective(const struct IldmSolveResult *res);

// Probability the learned policy assigns to action `a` at state `s` of layer `h`.
//
// # Safety
// `res` must be a live handle and `out` writable.
enum IldmStatus ildm_result_policy_prob(const struct IldmSolveResult *res,
                                        size_t h,
                                        size_t s,
                                        size_t a,
                                        double *out);

// Expected true return of the learned policy on `mdp`.
//
// # Safety
// Handles must be live and `out` writable.
enum IldmStatus ildm_result_return(const struct IldmMdp *mdp,
                                   const struct IldmSolveResult *res,
                                   double *out);

// The result as JSON; free with [`ildm_string_free`].
//
// # Safety
// `res` must be a live handle and `out` writable.
enum IldmStatus ildm_result_to_json(const struct IldmSolveResult *res, char **out);

// Releases a result handle; null is ignored.
//
// # Safety
// `res` must be null or a handle not yet freed.
void ildm_result_free(struct IldmSolveResult *res);

// Releases a string returned by this library; null is ignored.
//
// # Safety
// `s` must be null or a string from this library not yet freed.
void ildm_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ILDM_H */
